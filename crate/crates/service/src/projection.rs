//! Render-ready views of the artifacts.

use cegforge_core::ceg::{CegModel, LabelMode, SINK};
use cegforge_core::priors::fmt_num;
use cegforge_core::{Colour, EventTree, StageModel, StagedTreeModel, Staging};
use serde_json::{json, Value};

fn edge_value(stage: &StageModel, j: usize, mode: LabelMode) -> Value {
    match mode {
        LabelMode::Prior => json!(stage.prior[j]),
        LabelMode::PriorMean => json!(stage.prior_mean()[j]),
        LabelMode::Posterior => json!(stage.posterior[j]),
        LabelMode::PosteriorMean => json!(stage.posterior_mean()[j]),
        LabelMode::None => Value::Null,
    }
}

fn edge_text(stage: &StageModel, j: usize, mode: LabelMode) -> Option<String> {
    match mode {
        LabelMode::Prior => Some(fmt_num(stage.prior[j])),
        LabelMode::PriorMean => Some(format!("{:.2}", stage.prior_mean()[j])),
        LabelMode::Posterior => Some(fmt_num(stage.posterior[j])),
        LabelMode::PosteriorMean => Some(format!("{:.2}", stage.posterior_mean()[j])),
        LabelMode::None => None,
    }
}

/// Vertices with their colours and edges with labels and counts.
pub fn tree(tree: &EventTree, staging: Option<&Staging>) -> Value {
    let vertices: Vec<Value> = tree
        .vertices()
        .map(|v| {
            let colour = staging
                .and_then(|s| s.colour_of(v.id))
                .unwrap_or(Colour::DEFAULT);
            json!({
                "id": v.id.to_string(),
                "level": v.level,
                "label": v.label,
                "count": v.count,
                "situation": v.is_situation(),
                "colour": colour.to_string(),
                "staged": staging.is_some_and(|s| s.assignments().contains_key(&v.id)),
            })
        })
        .collect();
    let edges: Vec<Value> = tree
        .edges()
        .map(|e| {
            json!({
                "from": e.parent.to_string(),
                "to": e.child.to_string(),
                "label": e.label,
                "variable": tree.variables()[e.variable],
                "count": e.count,
            })
        })
        .collect();
    json!({ "vertices": vertices, "edges": edges })
}

/// The tree view with stage ids and edge parameters per the label mode.
pub fn staged_tree(model: &StagedTreeModel) -> Value {
    let t = model.tree();
    let mode = model.label_mode();
    let vertices: Vec<Value> = t
        .vertices()
        .map(|v| {
            let stage = model.stage_of(v.id);
            json!({
                "id": v.id.to_string(),
                "level": v.level,
                "label": v.label,
                "count": v.count,
                "situation": v.is_situation(),
                "colour": stage.map_or(Colour::DEFAULT, |s| s.colour).to_string(),
                "stage": stage.map(|s| s.id.clone()),
            })
        })
        .collect();
    let mut edges = Vec::new();
    for v in t.situations() {
        let stage = model.stage_of(v.id).expect("complete staging");
        for (j, c) in t.children(v.id).enumerate() {
            edges.push(json!({
                "from": v.id.to_string(),
                "to": c.id.to_string(),
                "label": c.label,
                "count": c.count,
                "value": edge_value(stage, j, mode),
                "text": edge_text(stage, j, mode),
            }));
        }
    }
    json!({
        "label_mode": mode,
        "vertices": vertices,
        "edges": edges,
        "stages": stage_moments(model.stages()),
    })
}

/// Per-stage means and variances, for hover text.
pub fn stage_moments(stages: &[StageModel]) -> Value {
    let rows: Vec<Value> = stages
        .iter()
        .map(|s| {
            let moments = |a: &[f64]| {
                let total: f64 = a.iter().sum();
                let mean: Vec<f64> = a.iter().map(|x| x / total).collect();
                let var: Vec<f64> = mean.iter().map(|m| m * (1.0 - m) / (total + 1.0)).collect();
                json!({ "mean": mean, "variance": var })
            };
            json!({
                "stage": s.id,
                "colour": s.colour.to_string(),
                "labels": s.labels,
                "prior": moments(&s.prior),
                "posterior": moments(&s.posterior),
            })
        })
        .collect();
    Value::Array(rows)
}

/// Positions with their incoming and outgoing edge indices.
pub fn ceg(model: &CegModel) -> Value {
    let colour_of = |stage: &str| model.stage(stage).map(|s| s.colour.to_string());
    let mut positions: Vec<Value> = model
        .positions
        .iter()
        .map(|p| {
            json!({
                "id": p.id,
                "level": p.level,
                "stage": p.stage,
                "colour": colour_of(&p.stage),
                "members": p.members.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "incoming": model.incoming(&p.id),
                "outgoing": model.outgoing(&p.id),
            })
        })
        .collect();
    let sink_level = model.positions.iter().map(|p| p.level + 1).max().unwrap_or(0);
    positions.push(json!({
        "id": SINK,
        "level": sink_level,
        "stage": Value::Null,
        "colour": Colour::DEFAULT.to_string(),
        "members": [],
        "incoming": model.incoming(SINK),
        "outgoing": [],
    }));
    let edges: Vec<Value> = model
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let stage = model.stage(&e.stage).expect("edge stage");
            json!({
                "index": i,
                "from": e.from,
                "to": e.to,
                "label": e.label,
                "variable": e.variable,
                "stage": e.stage,
                "probability": model.edge_probability(e),
                "value": edge_value(stage, e.index, model.label_mode),
                "text": edge_text(stage, e.index, model.label_mode),
            })
        })
        .collect();
    json!({ "label_mode": model.label_mode, "positions": positions, "edges": edges, "sink": SINK })
}
