//! Stages: which situations share a distribution over their outgoing edges.
//!
//! A stage is identified by its colour. Situations that have not been given
//! a colour are unstaged, except the root, which always forms its own stage
//! and keeps the default colour unless the user colours it. All members of a
//! stage sit on the same level and have the same ordered outgoing labels.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::colour::{Colour, Palette};
use crate::error::{Error, Result};
use crate::event_tree::{EventTree, VertexId};
use crate::priors::PriorTable;
use crate::score;

/// Manual and clustered stage assignment over an event tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Staging {
    colours: BTreeMap<VertexId, Colour>,
    frozen: BTreeSet<Colour>,
}

/// A stage as seen against a particular tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub colour: Colour,
    pub level: usize,
    pub labels: Vec<String>,
    pub members: Vec<VertexId>,
    pub frozen: bool,
}

/// Name of the `index`-th stage (0-based) in canonical order: `u1, u2, ...`.
pub fn stage_name(index: usize) -> String {
    format!("u{}", index + 1)
}

impl Staging {
    pub fn new() -> Self {
        Self::default()
    }

    /// Colour of a vertex, if it has been staged. The root reports the
    /// default colour until coloured.
    pub fn colour_of(&self, id: VertexId) -> Option<Colour> {
        match self.colours.get(&id) {
            Some(c) => Some(*c),
            None if id == VertexId::ROOT => Some(Colour::DEFAULT),
            None => None,
        }
    }

    pub fn assignments(&self) -> &BTreeMap<VertexId, Colour> {
        &self.colours
    }

    pub fn frozen_colours(&self) -> &BTreeSet<Colour> {
        &self.frozen
    }

    pub fn is_frozen(&self, colour: Colour) -> bool {
        self.frozen.contains(&colour)
    }

    /// Non-root situations without a stage, in id order.
    pub fn uncoloured(&self, tree: &EventTree) -> Vec<VertexId> {
        tree.situations()
            .filter(|v| v.id != VertexId::ROOT && !self.colours.contains_key(&v.id))
            .map(|v| v.id)
            .collect()
    }

    pub fn is_complete(&self, tree: &EventTree) -> bool {
        self.uncoloured(tree).is_empty()
    }

    /// Stages in canonical order (level, then colour text). Unstaged
    /// situations are left out.
    pub fn stages(&self, tree: &EventTree) -> Result<Vec<Stage>> {
        self.validate(tree)?;
        let mut by_colour: BTreeMap<Colour, Vec<VertexId>> = BTreeMap::new();
        if !self.colours.contains_key(&VertexId::ROOT) {
            by_colour.insert(Colour::DEFAULT, vec![VertexId::ROOT]);
        }
        for (id, c) in &self.colours {
            by_colour.entry(*c).or_default().push(*id);
        }
        let mut stages: Vec<Stage> = by_colour
            .into_iter()
            .map(|(colour, members)| {
                let first = tree.vertex(members[0]).expect("validated");
                Stage {
                    colour,
                    level: first.level,
                    labels: tree
                        .out_labels(members[0])
                        .into_iter()
                        .map(str::to_string)
                        .collect(),
                    frozen: self.frozen.contains(&colour),
                    members,
                }
            })
            .collect();
        stages.sort_by(|a, b| {
            (a.level, a.colour.to_string()).cmp(&(b.level, b.colour.to_string()))
        });
        Ok(stages)
    }

    /// Like [`Self::stages`] but every situation must be staged.
    pub fn complete_stages(&self, tree: &EventTree) -> Result<Vec<Stage>> {
        let left = self.uncoloured(tree);
        if !left.is_empty() {
            return Err(Error::Incomplete(format!(
                "{} situation(s) still need a stage, starting with {}",
                left.len(),
                left[0]
            )));
        }
        self.stages(tree)
    }

    /// Checks the staging against a tree: every coloured vertex is a
    /// situation, colours are not the default (except on the root) and
    /// stage members agree on level and outgoing labels.
    pub fn validate(&self, tree: &EventTree) -> Result<()> {
        let mut first_of: HashMap<Colour, VertexId> = HashMap::new();
        for (&id, &c) in &self.colours {
            let v = tree.vertex(id)?;
            if !v.is_situation() {
                return Err(Error::validation(format!("{id} is a leaf and cannot be staged")));
            }
            if c.is_default() && id != VertexId::ROOT {
                return Err(Error::validation(format!(
                    "{} is reserved for unstaged situations",
                    Colour::DEFAULT
                )));
            }
            match first_of.get(&c) {
                None => {
                    first_of.insert(c, id);
                }
                Some(&other) => check_compatible(tree, other, id)?,
            }
        }
        if let Some(c) = self.colours.get(&VertexId::ROOT) {
            if self.colours.iter().any(|(id, x)| x == c && *id != VertexId::ROOT) {
                return Err(Error::validation("the root must be its own stage"));
            }
        }
        Ok(())
    }

    /// Places each group in a frozen stage. Vertices already staged move to
    /// their new group. With `colours` absent, palette colours not already in
    /// use are chosen.
    pub fn assign_stages(
        &self,
        tree: &EventTree,
        groups: &[Vec<VertexId>],
        colours: Option<&[Colour]>,
    ) -> Result<Staging> {
        if let Some(cs) = colours {
            if cs.len() != groups.len() {
                return Err(Error::validation(format!(
                    "{} groups but {} colours",
                    groups.len(),
                    cs.len()
                )));
            }
            let distinct: BTreeSet<_> = cs.iter().collect();
            if distinct.len() != cs.len() {
                return Err(Error::validation("each group needs a different colour"));
            }
            if cs.iter().any(|c| c.is_default()) {
                return Err(Error::validation(format!(
                    "{} is reserved for unstaged situations",
                    Colour::DEFAULT
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for group in groups {
            if group.is_empty() {
                return Err(Error::validation("empty node group"));
            }
            for &id in group {
                let v = tree.vertex(id)?;
                if !v.is_situation() {
                    return Err(Error::validation(format!("{id} is a leaf and cannot be staged")));
                }
                if !seen.insert(id) {
                    return Err(Error::validation(format!("{id} appears in two groups")));
                }
            }
            for &id in &group[1..] {
                check_compatible(tree, group[0], id)?;
            }
            if group.len() > 1 && group.contains(&VertexId::ROOT) {
                return Err(Error::validation("the root must be its own stage"));
            }
        }

        let mut next = self.clone();
        let mut palette = Palette::new();
        for (i, group) in groups.iter().enumerate() {
            for id in group {
                next.colours.remove(id);
            }
            let colour = match colours {
                Some(cs) => cs[i],
                None => {
                    let used: BTreeSet<Colour> = next.colours.values().copied().collect();
                    palette.next_free(|c| used.contains(&c))
                }
            };
            if let Some((&member, _)) = next.colours.iter().find(|(_, c)| **c == colour) {
                if group.contains(&VertexId::ROOT) || member == VertexId::ROOT {
                    return Err(Error::validation("the root must be its own stage"));
                }
                check_compatible(tree, member, group[0])?;
            }
            for &id in group {
                next.colours.insert(id, colour);
            }
            next.frozen.insert(colour);
        }
        next.retain_live_frozen();
        Ok(next)
    }

    /// Removes vertices from their stages.
    pub fn clear(&self, ids: &[VertexId]) -> Staging {
        let mut next = self.clone();
        for id in ids {
            next.colours.remove(id);
        }
        next.retain_live_frozen();
        next
    }

    fn retain_live_frozen(&mut self) {
        let live: BTreeSet<Colour> = self.colours.values().copied().collect();
        self.frozen.retain(|c| live.contains(c));
    }

    /// Completes the staging by agglomerative hierarchical clustering.
    ///
    /// Every unstaged situation starts in a stage of its own, and stages left
    /// by an earlier clustering run are kept as starting clusters. Frozen
    /// stages and the root never take part. At each step the pair of stages
    /// on the same level with identical outgoing labels whose pooling raises
    /// the score the most is pooled, as long as the gain is positive. Ties go
    /// to the pair whose smallest member ids are smallest.
    ///
    /// Clusters start from a Dirichlet(1, ..., 1) prior per situation unless
    /// `priors` has a row for an existing stage's colour, in which case that
    /// row's prior is used for it.
    pub fn run_ahc(&self, tree: &EventTree, priors: Option<&PriorTable>) -> Result<AhcOutcome> {
        self.validate(tree)?;
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut old_colour: BTreeMap<VertexId, Colour> = BTreeMap::new();
        let mut unfrozen: BTreeMap<Colour, Vec<VertexId>> = BTreeMap::new();
        for (&id, &c) in &self.colours {
            if id != VertexId::ROOT && !self.frozen.contains(&c) {
                unfrozen.entry(c).or_default().push(id);
            }
        }
        for (colour, members) in unfrozen {
            let mut cluster = Cluster::new(tree, &members);
            if let Some(row) = priors.and_then(|p| p.row_for_colour(colour)) {
                if row.prior.len() != cluster.prior.len() {
                    return Err(Error::validation(format!(
                        "prior row {} has {} entries, stage has {} edges",
                        row.stage,
                        row.prior.len(),
                        cluster.prior.len()
                    )));
                }
                cluster.prior = row.prior.clone();
            }
            old_colour.insert(members[0], colour);
            clusters.push(cluster);
        }
        for id in self.uncoloured(tree) {
            clusters.push(Cluster::new(tree, &[id]));
        }
        clusters.sort_by_key(|c| c.key());

        let initial_score: f64 = clusters.iter().map(Cluster::score).sum();
        let mut score = initial_score;
        let mut active: Vec<bool> = vec![true; clusters.len()];
        let mut heap = BinaryHeap::new();
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if let Some(c) = Candidate::new(&clusters, i, j) {
                    heap.push(c);
                }
            }
        }
        let mut steps = Vec::new();
        while let Some(best) = heap.pop() {
            if !active[best.a] || !active[best.b] {
                continue;
            }
            if best.log_bf <= 0.0 {
                break;
            }
            let merged = clusters[best.a].pooled(&clusters[best.b]);
            active[best.a] = false;
            active[best.b] = false;
            score += best.log_bf;
            steps.push(AhcStep {
                first: clusters[best.a].members.clone(),
                second: clusters[best.b].members.clone(),
                log_bayes_factor: best.log_bf,
                score,
            });
            clusters.push(merged);
            active.push(true);
            let new = clusters.len() - 1;
            for i in 0..new {
                if active[i] {
                    if let Some(c) = Candidate::new(&clusters, i, new) {
                        heap.push(c);
                    }
                }
            }
        }

        let mut finals: Vec<&Cluster> = clusters
            .iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .map(|(c, _)| c)
            .collect();
        finals.sort_by_key(|c| (c.level, c.key()));

        let mut next = Staging {
            colours: self
                .colours
                .iter()
                .filter(|(id, c)| **id == VertexId::ROOT || self.frozen.contains(*c))
                .map(|(id, c)| (*id, *c))
                .collect(),
            frozen: self.frozen.clone(),
        };
        let mut taken: BTreeSet<Colour> = next.colours.values().copied().collect();
        let mut chosen: Vec<Option<Colour>> = finals
            .iter()
            .map(|c| {
                c.members
                    .iter()
                    .filter_map(|m| old_colour.get(m))
                    .find(|col| !taken.contains(*col))
                    .copied()
            })
            .collect();
        // An old colour may only be reused once.
        for slot in chosen.iter_mut() {
            if let Some(c) = *slot {
                if !taken.insert(c) {
                    *slot = None;
                }
            }
        }
        let mut palette = Palette::new();
        for (cluster, slot) in finals.iter().zip(chosen) {
            let colour = match slot {
                Some(c) => c,
                None => {
                    let c = palette.next_free(|c| taken.contains(&c));
                    taken.insert(c);
                    c
                }
            };
            for &m in &cluster.members {
                next.colours.insert(m, colour);
            }
        }
        Ok(AhcOutcome {
            staging: next,
            steps,
            initial_score,
            final_score: score,
        })
    }

    pub fn summary(&self, tree: &EventTree) -> StagingSummary {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for v in tree.vertices() {
            let c = self.colours.get(&v.id).copied().unwrap_or(Colour::DEFAULT);
            *counts.entry(c.to_string()).or_insert(0) += 1;
        }
        StagingSummary {
            total_nodes: tree.node_count(),
            total_edges: tree.edge_count(),
            left_to_colour: self.uncoloured(tree).len(),
            colour_counts: counts.into_iter().collect(),
        }
    }

    pub fn to_document(&self, tree: &EventTree) -> Result<StagingDocument> {
        let stages = self.stages(tree)?;
        Ok(StagingDocument {
            stages: stages
                .into_iter()
                .enumerate()
                .filter(|(_, s)| !(s.colour.is_default() && s.members == [VertexId::ROOT]))
                .map(|(i, s)| StageRecord {
                    stage: stage_name(i),
                    colour: s.colour,
                    members: s.members,
                    frozen: s.frozen,
                })
                .collect(),
        })
    }

    /// Rebuilds a staging from its document, checking it against `tree`.
    pub fn from_document(doc: &StagingDocument, tree: &EventTree) -> Result<Staging> {
        let mut staging = Staging::new();
        for (i, rec) in doc.stages.iter().enumerate() {
            if rec.members.is_empty() {
                return Err(Error::format(format!("stages[{i}].members"), "empty stage"));
            }
            for &m in &rec.members {
                if staging.colours.insert(m, rec.colour).is_some() {
                    return Err(Error::format(
                        format!("stages[{i}].members"),
                        format!("{m} is in two stages"),
                    ));
                }
            }
            if rec.frozen {
                staging.frozen.insert(rec.colour);
            }
        }
        staging
            .validate(tree)
            .map_err(|e| Error::format("stages", e))?;
        Ok(staging)
    }

    /// Applies `map` to every colour. `map` must be injective on the colours
    /// in use.
    pub fn recolour(&self, map: impl Fn(Colour) -> Colour) -> Staging {
        Staging {
            colours: self.colours.iter().map(|(id, c)| (*id, map(*c))).collect(),
            frozen: self.frozen.iter().map(|c| map(*c)).collect(),
        }
    }
}

fn check_compatible(tree: &EventTree, a: VertexId, b: VertexId) -> Result<()> {
    let (va, vb) = (tree.vertex(a)?, tree.vertex(b)?);
    if va.level != vb.level {
        return Err(Error::InvalidStaging {
            first: a.to_string(),
            second: b.to_string(),
            reason: format!("are on different levels ({} and {})", va.level, vb.level),
        });
    }
    if tree.out_labels(a) != tree.out_labels(b) {
        return Err(Error::InvalidStaging {
            first: a.to_string(),
            second: b.to_string(),
            reason: "have different outgoing edge labels".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Cluster {
    members: Vec<VertexId>,
    level: usize,
    labels: Vec<String>,
    prior: Vec<f64>,
    data: Vec<u64>,
}

impl Cluster {
    fn new(tree: &EventTree, members: &[VertexId]) -> Self {
        let first = members[0];
        let labels: Vec<String> = tree
            .out_labels(first)
            .into_iter()
            .map(str::to_string)
            .collect();
        let mut data = vec![0u64; labels.len()];
        for &m in members {
            for (d, c) in data.iter_mut().zip(tree.out_counts(m)) {
                *d += c;
            }
        }
        Self {
            members: members.to_vec(),
            level: tree.vertex(first).expect("staged vertex exists").level,
            prior: vec![members.len() as f64; labels.len()],
            labels,
            data,
        }
    }

    fn key(&self) -> VertexId {
        self.members[0]
    }

    fn score(&self) -> f64 {
        score::log_marginal_unchecked(&self.prior, &self.data)
    }

    fn pooled(&self, other: &Cluster) -> Cluster {
        let mut members = self.members.clone();
        members.extend(&other.members);
        members.sort();
        Cluster {
            members,
            level: self.level,
            labels: self.labels.clone(),
            prior: self.prior.iter().zip(&other.prior).map(|(a, b)| a + b).collect(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }
}

struct Candidate {
    log_bf: f64,
    keys: (VertexId, VertexId),
    a: usize,
    b: usize,
}

impl Candidate {
    fn new(clusters: &[Cluster], i: usize, j: usize) -> Option<Self> {
        let (ci, cj) = (&clusters[i], &clusters[j]);
        if ci.level != cj.level || ci.labels != cj.labels {
            return None;
        }
        let log_bf = score::merge_log_bayes_factor(&ci.prior, &ci.data, &cj.prior, &cj.data)
            .expect("clusters share a label set");
        let (a, b) = if ci.key() < cj.key() { (i, j) } else { (j, i) };
        Some(Self {
            log_bf,
            keys: (clusters[a].key(), clusters[b].key()),
            a,
            b,
        })
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_bf
            .total_cmp(&other.log_bf)
            .then_with(|| other.keys.cmp(&self.keys))
    }
}

/// One accepted merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhcStep {
    pub first: Vec<VertexId>,
    pub second: Vec<VertexId>,
    pub log_bayes_factor: f64,
    /// Score of the clustered stages after this merge.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AhcOutcome {
    pub staging: Staging,
    pub steps: Vec<AhcStep>,
    /// Summed score of the stages taking part, before any merge.
    pub initial_score: f64,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingSummary {
    pub total_nodes: usize,
    pub total_edges: usize,
    pub left_to_colour: usize,
    /// Vertices per colour, sorted by colour text. Includes the default
    /// colour, which covers leaves and unstaged vertices.
    pub colour_counts: Vec<(String, usize)>,
}

impl StagingSummary {
    pub fn count_of(&self, colour: &str) -> usize {
        let want = colour.to_ascii_uppercase();
        self.colour_counts
            .iter()
            .find(|(c, _)| *c == want)
            .map_or(0, |(_, n)| *n)
    }
}

impl fmt::Display for StagingSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Summary of Staged Tree Object")?;
        writeln!(f, "=============================")?;
        writeln!(f, "Total nodes: {}", self.total_nodes)?;
        writeln!(f, "Total edges: {}", self.total_edges)?;
        writeln!(f, "Nodes left to be coloured: {}", self.left_to_colour)?;
        writeln!(f)?;
        writeln!(f, "Node colour counts:")?;
        for (c, n) in &self.colour_counts {
            let noun = if *n == 1 { "node" } else { "nodes" };
            writeln!(f, "{c} ({n} {noun})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingDocument {
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub colour: Colour,
    pub members: Vec<VertexId>,
    pub frozen: bool,
}

/// A stage with its Dirichlet prior, pooled counts and posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub id: String,
    pub colour: Colour,
    pub level: usize,
    pub members: Vec<VertexId>,
    pub labels: Vec<String>,
    pub prior: Vec<f64>,
    pub data: Vec<u64>,
    pub posterior: Vec<f64>,
}

impl StageModel {
    pub fn new(stage: &Stage, id: String, prior: Vec<f64>) -> Result<Self> {
        if prior.len() != stage.labels.len() {
            return Err(Error::validation(format!(
                "stage {id} has {} outgoing edges but its prior has {} entries",
                stage.labels.len(),
                prior.len()
            )));
        }
        if let Some(bad) = prior.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Domain(format!(
                "stage {id}: Dirichlet parameters must be positive, got {bad}"
            )));
        }
        Ok(Self {
            id,
            colour: stage.colour,
            level: stage.level,
            members: stage.members.clone(),
            labels: stage.labels.clone(),
            data: vec![0; prior.len()],
            posterior: prior.clone(),
            prior,
        })
    }

    /// Builds a free-standing stage, mainly for scoring and tests.
    pub fn from_parts(id: &str, labels: Vec<String>, prior: Vec<f64>, data: Vec<u64>) -> Result<Self> {
        let stage = Stage {
            colour: Colour::DEFAULT,
            level: 0,
            labels,
            members: Vec::new(),
            frozen: false,
        };
        if data.len() != prior.len() {
            return Err(Error::validation("prior and data lengths differ"));
        }
        Ok(Self::new(&stage, id.to_string(), prior)?.with_data(data))
    }

    /// Replaces the counts and recomputes the posterior.
    pub fn with_data(mut self, data: Vec<u64>) -> Self {
        assert_eq!(data.len(), self.prior.len(), "one count per edge");
        self.posterior = self
            .prior
            .iter()
            .zip(&data)
            .map(|(a, y)| a + *y as f64)
            .collect();
        self.data = data;
        self
    }

    pub fn out_degree(&self) -> usize {
        self.labels.len()
    }

    pub fn prior_mean(&self) -> Vec<f64> {
        normalise(&self.prior)
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        normalise(&self.posterior)
    }

    /// Effective sample size: total posterior weight.
    pub fn ess(&self) -> f64 {
        self.posterior.iter().sum()
    }

    pub fn log_score(&self) -> f64 {
        score::log_marginal_unchecked(&self.prior, &self.data)
    }
}

fn normalise(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

/// Score change from pooling two stages.
pub fn merge_score(a: &StageModel, b: &StageModel) -> Result<f64> {
    if a.labels != b.labels {
        return Err(Error::validation(format!(
            "stages {} and {} have different outgoing labels",
            a.id, b.id
        )));
    }
    score::merge_log_bayes_factor(&a.prior, &a.data, &b.prior, &b.data)
}
