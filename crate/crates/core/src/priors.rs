//! Dirichlet priors per stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colour::Colour;
use crate::error::{Error, Result};
use crate::event_tree::{EventTree, VertexId};
use crate::staging::{stage_name, Stage, Staging};

pub use crate::score::dirichlet_moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    Custom,
    Uniform,
    Phantom,
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "custom" => Ok(Self::Custom),
            "uniform" => Ok(Self::Uniform),
            "phantom" => Ok(Self::Phantom),
            _ => Err(Error::Config(format!(
                "unknown prior mode `{s}` (expected custom, uniform or phantom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRow {
    pub stage: String,
    pub colour: Colour,
    pub level: usize,
    pub k: usize,
    pub nodes: usize,
    pub prior: Vec<f64>,
}

impl PriorRow {
    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.prior.iter().sum();
        self.prior.iter().map(|a| a / total).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        dirichlet_moments(&self.prior).map(|(_, v)| v).unwrap_or_default()
    }
}

/// One prior row per stage, in stage order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriorTable {
    pub rows: Vec<PriorRow>,
}

/// Key of an override: a stage id such as `u4`, or its 1-based row number.
pub fn parse_override_key(key: &str) -> Result<usize> {
    let k = key.trim();
    let digits = k.strip_prefix(['u', 'U']).unwrap_or(k);
    match digits.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n - 1),
        _ => Err(Error::validation(format!("`{key}` is not a stage id or row number"))),
    }
}

/// Parses `u1=200,1000,400,100` into a row index and vector.
pub fn parse_override(text: &str) -> Result<(usize, Vec<f64>)> {
    let (key, values) = text
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override `{text}` should look like u1=1,2,3")))?;
    let vector = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("`{v}` in override `{text}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((parse_override_key(key)?, vector))
}

fn check_vector(stage: &str, k: usize, v: &[f64]) -> Result<()> {
    if v.len() != k {
        return Err(Error::validation(format!(
            "stage {stage} has {k} outgoing edges but {} prior values were given",
            v.len()
        )));
    }
    if let Some(bad) = v.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::validation(format!(
            "stage {stage}: prior values must be positive, got {bad}"
        )));
    }
    Ok(())
}

impl PriorTable {
    /// Builds the table for a complete staging. `overrides` maps row index
    /// (0-based, equal to stage order) to a replacement vector and is
    /// applied after the mode's defaults.
    pub fn specify(
        tree: &EventTree,
        staging: &Staging,
        mode: PriorMode,
        overrides: &BTreeMap<usize, Vec<f64>>,
    ) -> Result<Self> {
        let stages = staging.complete_stages(tree)?;
        if let Some(&bad) = overrides.keys().find(|i| **i >= stages.len()) {
            return Err(Error::validation(format!(
                "override for {} but there are only {} stages",
                stage_name(bad),
                stages.len()
            )));
        }
        let phantom = match mode {
            PriorMode::Phantom => Some(phantom_masses(tree)),
            _ => None,
        };
        let mut rows = Vec::with_capacity(stages.len());
        for (i, stage) in stages.iter().enumerate() {
            let id = stage_name(i);
            let k = stage.labels.len();
            let prior = if let Some(v) = overrides.get(&i) {
                check_vector(&id, k, v)?;
                v.clone()
            } else {
                match mode {
                    PriorMode::Uniform => vec![1.0; k],
                    PriorMode::Phantom => stage_phantom(stage, phantom.as_ref().unwrap()),
                    PriorMode::Custom => {
                        return Err(Error::Incomplete(format!(
                            "custom priors need a vector for every stage; {id} has none"
                        )))
                    }
                }
            };
            rows.push(PriorRow {
                stage: id,
                colour: stage.colour,
                level: stage.level,
                k,
                nodes: stage.members.len(),
                prior,
            });
        }
        Ok(Self { rows })
    }

    pub fn uniform(tree: &EventTree, staging: &Staging) -> Result<Self> {
        Self::specify(tree, staging, PriorMode::Uniform, &BTreeMap::new())
    }

    pub fn phantom(tree: &EventTree, staging: &Staging) -> Result<Self> {
        Self::specify(tree, staging, PriorMode::Phantom, &BTreeMap::new())
    }

    /// Replaces individual rows.
    pub fn with_overrides(&self, overrides: &BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let mut next = self.clone();
        for (&i, v) in overrides {
            let row = next.rows.get_mut(i).ok_or_else(|| {
                Error::validation(format!(
                    "override for {} but there are only {} rows",
                    stage_name(i),
                    self.rows.len()
                ))
            })?;
            check_vector(&row.stage, row.k, v)?;
            row.prior = v.clone();
        }
        Ok(next)
    }

    pub fn row(&self, stage: &str) -> Option<&PriorRow> {
        self.rows.iter().find(|r| r.stage == stage)
    }

    pub fn row_for_colour(&self, colour: Colour) -> Option<&PriorRow> {
        self.rows.iter().find(|r| r.colour == colour)
    }

    /// Delimited text with columns stage, colour, level, k, nodes, prior and
    /// prior_mean. Vectors are comma separated inside their cell and levels
    /// are written with the root on level 1.
    pub fn to_delimited(&self, separator: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(separator).from_writer(Vec::new());
        w.write_record(["stage", "colour", "level", "k", "nodes", "prior", "prior_mean"])
            .expect("in-memory write");
        for r in &self.rows {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            w.write_record([
                r.stage.clone(),
                r.colour.to_string(),
                (r.level + 1).to_string(),
                r.k.to_string(),
                r.nodes.to_string(),
                join(&r.prior),
                join(&r.mean()),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }

    pub fn from_delimited(text: &str, separator: u8) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .delimiter(separator)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row_no = i + 2;
            let rec = rec.map_err(|e| Error::Parse { row: row_no, message: e.to_string() })?;
            if rec.len() < 6 {
                return Err(Error::Parse {
                    row: row_no,
                    message: format!("expected at least 6 fields, found {}", rec.len()),
                });
            }
            let field = |n: usize, name: &str| -> Result<usize> {
                rec[n].trim().parse().map_err(|_| Error::Parse {
                    row: row_no,
                    message: format!("{name} `{}` is not a whole number", &rec[n]),
                })
            };
            let prior = rec[5]
                .split(',')
                .map(str::trim)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        row: row_no,
                        message: format!("prior value `{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let row = PriorRow {
                stage: rec[0].trim().to_string(),
                colour: rec[1].parse()?,
                level: field(2, "level")?.checked_sub(1).ok_or_else(|| Error::Parse {
                    row: row_no,
                    message: "levels start at 1".into(),
                })?,
                k: field(3, "k")?,
                nodes: field(4, "nodes")?,
                prior,
            };
            check_vector(&row.stage, row.k, &row.prior)?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Mass flowing into each situation under the phantom scheme: the root
/// holds the maximum out-degree, and each situation passes its mass on in
/// equal parts over the edges it has.
pub fn phantom_masses(tree: &EventTree) -> BTreeMap<VertexId, f64> {
    let alpha = tree.max_out_degree() as f64;
    let mut mass = BTreeMap::new();
    mass.insert(VertexId::ROOT, alpha);
    // Parents precede children in id order.
    for v in tree.vertices() {
        let m = mass[&v.id];
        let k = v.children.len();
        for c in &v.children {
            mass.insert(*c, m / k as f64);
        }
    }
    mass
}

fn stage_phantom(stage: &Stage, masses: &BTreeMap<VertexId, f64>) -> Vec<f64> {
    let k = stage.labels.len();
    let per_edge: f64 = stage.members.iter().map(|m| masses[m] / k as f64).sum();
    vec![per_edge; k]
}

/// Phantom priors for a complete staging.
pub fn phantom_allocation(tree: &EventTree, staging: &Staging) -> Result<PriorTable> {
    PriorTable::phantom(tree, staging)
}

impl fmt::Display for PriorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:<8} {:>5} {:>14} {:>5}  {:<20} Prior Mean",
            "Stage", "Colour", "Level", "Outgoing Edges", "Nodes", "Prior"
        )?;
        for r in &self.rows {
            let prior = r.prior.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",");
            let mean = r.mean().iter().map(|x| fmt_round2(*x)).collect::<Vec<_>>().join(",");
            writeln!(
                f,
                "{:<6} {:<8} {:>5} {:>14} {:>5}  {:<20} {}",
                r.stage,
                r.colour.to_string(),
                r.level + 1,
                r.k,
                r.nodes,
                prior,
                mean
            )?;
        }
        Ok(())
    }
}

/// Whole numbers without a fractional part, others with up to 4 decimals.
pub fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        trim_zeros(format!("{x:.4}"))
    }
}

/// Two decimals with trailing zeros dropped: 0.50 prints as 0.5, 1.00 as 1.
pub(crate) fn fmt_round2(x: f64) -> String {
    trim_zeros(format!("{x:.2}"))
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
