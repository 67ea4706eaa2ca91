//! Staged tree models, conjugate updating and chain event graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_tree::{escape_dot, EventTree, VertexId};
use crate::priors::{fmt_num, PriorTable};
use crate::staging::{stage_name, StageModel, Staging};

/// Id of the sink position that absorbs every leaf.
pub const SINK: &str = "w∞";

/// Stages whose effective sample size is below this are flagged.
pub const ESS_THRESHOLD: f64 = 100.0;

/// Which numbers decorate edges when a model is drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Prior,
    PriorMean,
    Posterior,
    #[default]
    PosteriorMean,
    None,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "prior" | "priors" => Ok(Self::Prior),
            "prior_mean" | "prior_means" => Ok(Self::PriorMean),
            "posterior" => Ok(Self::Posterior),
            "posterior_mean" | "posterior_means" => Ok(Self::PosteriorMean),
            "none" | "" => Ok(Self::None),
            other => Err(Error::Config(format!(
                "unknown label mode `{other}` (expected prior, prior_mean, posterior, posterior_mean or none)"
            ))),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Prior => "prior",
            Self::PriorMean => "prior_mean",
            Self::Posterior => "posterior",
            Self::PosteriorMean => "posterior_mean",
            Self::None => "none",
        })
    }
}

fn edge_number(stage: &StageModel, j: usize, mode: LabelMode) -> Option<String> {
    match mode {
        LabelMode::Prior => Some(fmt_num(stage.prior[j])),
        LabelMode::PriorMean => Some(format!("{:.2}", stage.prior_mean()[j])),
        LabelMode::Posterior => Some(fmt_num(stage.posterior[j])),
        LabelMode::PosteriorMean => Some(format!("{:.2}", stage.posterior_mean()[j])),
        LabelMode::None => None,
    }
}

/// An event tree with a complete staging and a Dirichlet model per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedTreeModel {
    tree: EventTree,
    staging: Staging,
    stages: Vec<StageModel>,
    stage_of: BTreeMap<VertexId, usize>,
    label_mode: LabelMode,
    updated: bool,
}

impl StagedTreeModel {
    /// Attaches a prior row to every stage. Rows are matched by colour.
    /// Counts are not applied yet, so every posterior equals its prior.
    pub fn new(
        tree: &EventTree,
        staging: &Staging,
        priors: &PriorTable,
        label_mode: LabelMode,
    ) -> Result<Self> {
        let stages = staging.complete_stages(tree)?;
        let mut models = Vec::with_capacity(stages.len());
        let mut stage_of = BTreeMap::new();
        for (i, stage) in stages.iter().enumerate() {
            let id = stage_name(i);
            let row = priors.row_for_colour(stage.colour).ok_or_else(|| {
                Error::Incomplete(format!("no prior row for stage {id} ({})", stage.colour))
            })?;
            if row.prior.len() != stage.labels.len() {
                return Err(Error::validation(format!(
                    "stage {id} has {} outgoing edges but its prior row has {} entries",
                    stage.labels.len(),
                    row.prior.len()
                )));
            }
            for m in &stage.members {
                stage_of.insert(*m, i);
            }
            models.push(StageModel::new(stage, id, row.prior.clone())?);
        }
        Ok(Self {
            tree: tree.clone(),
            staging: staging.clone(),
            stages: models,
            stage_of,
            label_mode,
            updated: false,
        })
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn staging(&self) -> &Staging {
        &self.staging
    }

    pub fn stages(&self) -> &[StageModel] {
        &self.stages
    }

    pub fn stage_of(&self, id: VertexId) -> Option<&StageModel> {
        self.stage_of.get(&id).map(|&i| &self.stages[i])
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn with_label_mode(mut self, mode: LabelMode) -> Self {
        self.label_mode = mode;
        self
    }

    /// Whether counts have been applied.
    pub fn is_updated(&self) -> bool {
        self.updated
    }

    /// Pools the counts of each stage's members and sets the posterior to
    /// prior plus counts.
    pub fn posterior_update(&self) -> Self {
        let mut next = self.clone();
        for stage in &mut next.stages {
            let mut data = vec![0u64; stage.out_degree()];
            for m in &stage.members {
                for (d, c) in data.iter_mut().zip(self.tree.out_counts(*m)) {
                    *d += c;
                }
            }
            *stage = stage.clone().with_data(data);
        }
        next.updated = true;
        next
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary::from_stages(&self.stages, self.tree.fingerprint())
    }

    /// Collapses the staged tree into its chain event graph.
    ///
    /// Two situations share a position when they are in the same stage and,
    /// label by label, their children share positions. All leaves go to the
    /// sink. Positions are numbered by level, then by smallest member id.
    pub fn contract(&self) -> CegModel {
        const LEAF: usize = usize::MAX;
        let mut situations: Vec<_> = self.tree.situations().collect();
        situations.sort_by_key(|v| (std::cmp::Reverse(v.level), v.id));
        let mut class_of: HashMap<VertexId, usize> = HashMap::new();
        let mut interned: HashMap<(usize, Vec<(String, usize)>), usize> = HashMap::new();
        let mut members: Vec<Vec<VertexId>> = Vec::new();
        for v in situations {
            let florets: Vec<(String, usize)> = self
                .tree
                .children(v.id)
                .map(|c| {
                    let class = if c.is_situation() { class_of[&c.id] } else { LEAF };
                    (c.label.clone().expect("non-root has a label"), class)
                })
                .collect();
            let key = (self.stage_of[&v.id], florets);
            let next = members.len();
            let class = *interned.entry(key).or_insert(next);
            if class == next {
                members.push(Vec::new());
            }
            members[class].push(v.id);
            class_of.insert(v.id, class);
        }
        for m in &mut members {
            m.sort();
        }
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by_key(|&c| (self.tree.vertex(members[c][0]).expect("situation").level, members[c][0]));
        let mut pos_name: HashMap<usize, String> = HashMap::new();
        let mut positions = Vec::with_capacity(order.len());
        for (i, &c) in order.iter().enumerate() {
            let id = format!("w{i}");
            pos_name.insert(c, id.clone());
            let first = members[c][0];
            positions.push(Position {
                id,
                level: self.tree.vertex(first).expect("situation").level,
                members: members[c].clone(),
                stage: self.stage_of(first).expect("staged").id.clone(),
            });
        }
        let mut edges = Vec::new();
        for p in &positions {
            let rep = p.members[0];
            for (j, c) in self.tree.children(rep).enumerate() {
                let to = if c.is_situation() {
                    pos_name[&class_of[&c.id]].clone()
                } else {
                    SINK.to_string()
                };
                edges.push(CegEdge {
                    from: p.id.clone(),
                    to,
                    label: c.label.clone().expect("non-root has a label"),
                    variable: self.tree.variables()[c.variable.expect("non-root")].clone(),
                    stage: p.stage.clone(),
                    index: j,
                });
            }
        }
        CegModel {
            variables: self.tree.variables().to_vec(),
            area_variable: self.tree.area_variable().map(str::to_string),
            fingerprint: self.tree.fingerprint().map(str::to_string),
            positions,
            edges,
            stages: self.stages.clone(),
            label_mode: self.label_mode,
        }
    }

    /// One row per stage with prior, prior mean, data, posterior and
    /// posterior mean.
    pub fn update_table(&self) -> UpdateTable {
        UpdateTable::from_stages(&self.stages)
    }

    /// Staged tree in DOT, coloured by stage, edges labelled per the label
    /// mode (counts when it is `none`).
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph staged_tree {\n  rankdir=LR;\n  node [shape=circle, style=filled];\n");
        for v in self.tree.vertices() {
            let fill = self
                .staging
                .colour_of(v.id)
                .map_or("#FFFFFF".to_string(), |c| c.to_string());
            out.push_str(&format!("  \"{}\" [fillcolor=\"{fill}\"];\n", v.id));
        }
        for e in self.tree.edges() {
            let stage = self.stage_of(e.parent).expect("complete staging");
            let j = self
                .tree
                .vertex(e.parent)
                .expect("edge parent")
                .children
                .iter()
                .position(|c| *c == e.child)
                .expect("child of parent");
            let number = edge_number(stage, j, self.label_mode).unwrap_or_else(|| e.count.to_string());
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{}\\n{}\"];\n",
                e.parent,
                e.child,
                escape_dot(e.label),
                number
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// A vertex of the chain event graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub id: String,
    pub level: usize,
    pub members: Vec<VertexId>,
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CegEdge {
    pub from: String,
    pub to: String,
    pub label: String,
    pub variable: String,
    pub stage: String,
    /// Index of this edge's parameter in its stage's vectors.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CegModel {
    pub variables: Vec<String>,
    pub area_variable: Option<String>,
    pub fingerprint: Option<String>,
    pub positions: Vec<Position>,
    pub edges: Vec<CegEdge>,
    pub stages: Vec<StageModel>,
    pub label_mode: LabelMode,
}

impl CegModel {
    pub fn position(&self, id: &str) -> Option<&Position> {
        self.positions.iter().find(|p| p.id == id)
    }

    pub fn stage(&self, id: &str) -> Option<&StageModel> {
        self.stages.iter().find(|s| s.id == id)
    }

    pub fn root(&self) -> Option<&Position> {
        self.positions.first()
    }

    /// Edges leaving a position, by index into [`Self::edges`].
    pub fn outgoing(&self, id: &str) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].from == id).collect()
    }

    pub fn incoming(&self, id: &str) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].to == id).collect()
    }

    /// Posterior mean of an edge.
    pub fn edge_probability(&self, edge: &CegEdge) -> f64 {
        let stage = self.stage(&edge.stage).expect("edge refers to a stage");
        stage.posterior[edge.index] / stage.ess()
    }

    pub fn with_label_mode(mut self, mode: LabelMode) -> Self {
        self.label_mode = mode;
        self
    }

    /// Label sequence of every root-to-sink path, in depth-first order.
    pub fn paths(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        if let Some(root) = self.root() {
            let adj = self.adjacency();
            let mut prefix = Vec::new();
            self.walk(&adj, &root.id, &mut prefix, &mut out);
        }
        out
    }

    fn adjacency(&self) -> HashMap<&str, Vec<&CegEdge>> {
        let mut adj: HashMap<&str, Vec<&CegEdge>> = HashMap::new();
        for e in &self.edges {
            adj.entry(e.from.as_str()).or_default().push(e);
        }
        adj
    }

    fn walk(
        &self,
        adj: &HashMap<&str, Vec<&CegEdge>>,
        at: &str,
        prefix: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        for e in adj.get(at).map(Vec::as_slice).unwrap_or(&[]) {
            prefix.push(e.label.clone());
            if e.to == SINK {
                out.push(prefix.clone());
            } else {
                self.walk(adj, &e.to, prefix, out);
            }
            prefix.pop();
        }
    }

    /// Keeps only the root-to-sink paths that carry every one of `categories`
    /// among their edge labels.
    pub fn reduced(&self, categories: &[&str]) -> Result<CegModel> {
        let wanted: Vec<&str> = {
            let mut seen = BTreeSet::new();
            categories.iter().copied().filter(|c| seen.insert(*c)).collect()
        };
        if wanted.len() > 63 {
            return Err(Error::validation("at most 63 filter categories are supported"));
        }
        for c in &wanted {
            if !self.edges.iter().any(|e| e.label == *c) {
                return Err(Error::lookup("category", *c));
            }
        }
        let bit = |label: &str| -> u64 {
            wanted
                .iter()
                .position(|c| *c == label)
                .map_or(0, |i| 1u64 << i)
        };
        let full = (1u64 << wanted.len()) - 1;
        let index: HashMap<&str, usize> = self
            .positions
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        let adj = self.adjacency();

        // Masks with which each position can be reached from the root.
        let mut forward: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); self.positions.len()];
        if !self.positions.is_empty() {
            forward[0].insert(0);
        }
        for (i, p) in self.positions.iter().enumerate() {
            let masks: Vec<u64> = forward[i].iter().copied().collect();
            for e in adj.get(p.id.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
                if e.to != SINK {
                    let t = index[e.to.as_str()];
                    for m in &masks {
                        forward[t].insert(m | bit(&e.label));
                    }
                }
            }
        }
        // Whether the sink can be reached from a position holding a mask with
        // every category collected on the way.
        let mut memo: HashMap<(usize, u64), bool> = HashMap::new();
        fn completes(
            model: &CegModel,
            adj: &HashMap<&str, Vec<&CegEdge>>,
            index: &HashMap<&str, usize>,
            bit: &dyn Fn(&str) -> u64,
            full: u64,
            memo: &mut HashMap<(usize, u64), bool>,
            at: usize,
            mask: u64,
        ) -> bool {
            if let Some(&v) = memo.get(&(at, mask)) {
                return v;
            }
            let mut ok = false;
            for e in adj.get(model.positions[at].id.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
                let m = mask | bit(&e.label);
                ok = if e.to == SINK {
                    m == full
                } else {
                    completes(model, adj, index, bit, full, memo, index[e.to.as_str()], m)
                };
                if ok {
                    break;
                }
            }
            memo.insert((at, mask), ok);
            ok
        }
        let mut keep = vec![false; self.edges.len()];
        for (k, e) in self.edges.iter().enumerate() {
            let from = index[e.from.as_str()];
            for &m in &forward[from] {
                let m2 = m | bit(&e.label);
                let ok = if e.to == SINK {
                    m2 == full
                } else {
                    completes(self, &adj, &index, &bit, full, &mut memo, index[e.to.as_str()], m2)
                };
                if ok {
                    keep[k] = true;
                    break;
                }
            }
        }
        if !keep.iter().any(|k| *k) {
            return Err(Error::validation(format!(
                "no path carries all of: {}",
                wanted.join(", ")
            )));
        }
        let edges: Vec<CegEdge> = self
            .edges
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(e, _)| e.clone())
            .collect();
        let live: BTreeSet<&str> = edges.iter().map(|e| e.from.as_str()).collect();
        let positions = self
            .positions
            .iter()
            .filter(|p| live.contains(p.id.as_str()))
            .cloned()
            .collect();
        Ok(CegModel {
            positions,
            edges,
            ..self.clone()
        })
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary::from_stages(&self.stages, self.fingerprint.as_deref())
    }

    pub fn update_table(&self) -> UpdateTable {
        UpdateTable::from_stages(&self.stages)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CegModel =
            serde_json::from_str(text).map_err(|e| Error::format("ceg", e))?;
        let ids: BTreeSet<&str> = model.positions.iter().map(|p| p.id.as_str()).collect();
        for (i, e) in model.edges.iter().enumerate() {
            if !ids.contains(e.from.as_str()) {
                return Err(Error::format(format!("edges[{i}].from"), "unknown position"));
            }
            if e.to != SINK && !ids.contains(e.to.as_str()) {
                return Err(Error::format(format!("edges[{i}].to"), "unknown position"));
            }
            match model.stage(&e.stage) {
                Some(s) if e.index < s.out_degree() => {}
                _ => return Err(Error::format(format!("edges[{i}].stage"), "unknown stage or index")),
            }
        }
        Ok(model)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ceg {\n  rankdir=LR;\n  node [shape=circle, style=filled];\n");
        for p in &self.positions {
            let fill = self.stage(&p.stage).map_or("#FFFFFF".into(), |s| s.colour.to_string());
            out.push_str(&format!("  \"{}\" [fillcolor=\"{fill}\"];\n", p.id));
        }
        out.push_str(&format!("  \"{SINK}\" [fillcolor=\"#FFFFFF\"];\n"));
        for e in &self.edges {
            let stage = self.stage(&e.stage).expect("edge refers to a stage");
            let label = match edge_number(stage, e.index, self.label_mode) {
                Some(n) => format!("{}\\n{n}", escape_dot(&e.label)),
                None => escape_dot(&e.label),
            };
            out.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{label}\"];\n", e.from, e.to));
        }
        out.push_str("}\n");
        out
    }
}

/// Conjugate update per stage, one row per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateTable {
    pub rows: Vec<StageModel>,
}

impl UpdateTable {
    fn from_stages(stages: &[StageModel]) -> Self {
        Self { rows: stages.to_vec() }
    }

    /// Columns Stage, Colour, Prior, Prior Mean, Data, Posterior and
    /// Posterior Mean; vectors in parentheses, means to 2 decimals.
    pub fn to_delimited(&self, separator: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(separator).from_writer(Vec::new());
        w.write_record(["Stage", "Colour", "Prior", "Prior Mean", "Data", "Posterior", "Posterior Mean"])
            .expect("in-memory write");
        for s in &self.rows {
            w.write_record([
                s.id.clone(),
                s.colour.to_string(),
                vector(&s.prior, |x| fmt_num(x)),
                vector(&s.prior_mean(), |x| format!("{x:.2}")),
                vector(&s.data.iter().map(|y| *y as f64).collect::<Vec<_>>(), |x| fmt_num(x)),
                vector(&s.posterior, |x| fmt_num(x)),
                vector(&s.posterior_mean(), |x| format!("{x:.2}")),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }
}

fn vector(v: &[f64], f: impl Fn(f64) -> String) -> String {
    format!("({})", v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(","))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub stage: String,
    pub log_score: f64,
    pub ess: f64,
    pub low_information: bool,
}

/// Total log marginal likelihood with per-stage scores and sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub total: f64,
    pub rows: Vec<SummaryRow>,
    pub fingerprint: Option<String>,
}

impl ModelSummary {
    pub fn from_stages(stages: &[StageModel], fingerprint: Option<&str>) -> Self {
        let rows: Vec<SummaryRow> = stages
            .iter()
            .map(|s| {
                let ess = s.ess();
                SummaryRow {
                    stage: s.id.clone(),
                    log_score: s.log_score(),
                    ess,
                    low_information: ess < ESS_THRESHOLD,
                }
            })
            .collect();
        Self {
            total: rows.iter().map(|r| r.log_score).sum(),
            rows,
            fingerprint: fingerprint.map(str::to_string),
        }
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.low_information)
            .map(|r| r.stage.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("summary", e))
    }
}

impl fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Chain Event Graph Summary")?;
        writeln!(f, "{}", "-".repeat(52))?;
        writeln!(f, "Total Log Marginal Likelihood:  {:.3}", self.total)?;
        writeln!(f)?;
        writeln!(f, "{:<6} {:>10} {:>8}", "Stage", "LogScore", "ESS")?;
        for r in &self.rows {
            let flag = if r.low_information { " **" } else { "" };
            writeln!(f, "{:<6} {:>10.3} {:>8}{flag}", r.stage, r.log_score, fmt_num(round_ess(r.ess)))?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Note: ESS (Effective Sample Size) reflects the total information (prior + data) available for each stage."
        )?;
        writeln!(
            f,
            "Stages with ESS < {} are flagged with \"**\" as potentially low-information stages.",
            ESS_THRESHOLD
        )?;
        if self.rows.iter().any(|r| r.low_information) {
            writeln!(f, "Increasing the strength of the prior would help this.")?;
        }
        Ok(())
    }
}

fn round_ess(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        (x * 100.0).round() / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preferred {
    Model1,
    Model2,
    Tie,
}

/// Log Bayes factor of model 1 against model 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub log_marginal_1: f64,
    pub log_marginal_2: f64,
    pub log_bayes_factor: f64,
    pub preferred: Preferred,
    /// Set when the two summaries were computed on different data.
    pub warning: Option<String>,
    /// Set when either model has a low-information stage.
    pub note: Option<String>,
}

impl ModelComparison {
    pub fn new(a: &ModelSummary, b: &ModelSummary) -> Self {
        let lbf = a.total - b.total;
        let preferred = if lbf > 0.0 {
            Preferred::Model1
        } else if lbf < 0.0 {
            Preferred::Model2
        } else {
            Preferred::Tie
        };
        let warning = match (&a.fingerprint, &b.fingerprint) {
            (Some(x), Some(y)) if x != y => Some(
                "the models were fitted to different data; the Bayes factor is not meaningful".to_string(),
            ),
            (None, _) | (_, None) => {
                Some("dataset fingerprint missing; cannot confirm both models used the same data".to_string())
            }
            _ => None,
        };
        let note = (!a.flagged().is_empty() || !b.flagged().is_empty()).then(|| {
            "Some stages have little information (ESS < 100); the score depends strongly on \
             the priors there, so read this comparison with caution."
                .to_string()
        });
        Self {
            log_marginal_1: a.total,
            log_marginal_2: b.total,
            log_bayes_factor: lbf,
            preferred,
            warning,
            note,
        }
    }
}

impl fmt::Display for ModelComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Log marginal of model 1:  {:.3}", self.log_marginal_1)?;
        writeln!(f, "Log marginal of model 2:  {:.3}", self.log_marginal_2)?;
        writeln!(f, "Log Bayes factor of Model 1 vs Model 2:  {:.3}", self.log_bayes_factor)?;
        let preferred = match self.preferred {
            Preferred::Model1 => "Model 1",
            Preferred::Model2 => "Model 2",
            Preferred::Tie => "Tie",
        };
        writeln!(f, "Preferred Model: {preferred}")?;
        if let Some(w) = &self.warning {
            writeln!(f, "Warning: {w}")?;
        }
        if let Some(n) = &self.note {
            writeln!(f, "Note: {n}")?;
        }
        Ok(())
    }
}
