//! Event trees.
//!
//! A tree is built symmetrically from every combination of category levels
//! of the selected columns, in column order. Vertex ids `s0, s1, ...` are
//! handed out breadth-first (parents in id order, children in byte-wise
//! label order) and never change afterwards; deleting vertices leaves holes
//! in the id sequence. Counts live on edges and are stored on the child
//! vertex of each edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnRef, Dataset};
use crate::error::{Error, Result};

/// Upper bound on the number of vertices a symmetric tree may have.
pub const MAX_VERTICES: usize = 2_000_000;

/// Identifier of an event tree vertex, written `s<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    pub const ROOT: VertexId = VertexId(0);
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        s.strip_prefix('s')
            .and_then(|n| n.parse().ok())
            .map(VertexId)
            .ok_or_else(|| Error::lookup("vertex", s))
    }
}

impl Serialize for VertexId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma separated id list such as `s15,s16`.
pub fn parse_ids(list: &str) -> Result<Vec<VertexId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub parent: Option<VertexId>,
    pub level: usize,
    /// Label of the incoming edge; `None` for the root.
    pub label: Option<String>,
    /// Index into the tree's variable order of the incoming edge's variable.
    pub variable: Option<usize>,
    /// Count on the incoming edge. For the root, the number of rows.
    pub count: u64,
    /// Children sorted by label.
    pub children: Vec<VertexId>,
}

impl Vertex {
    pub fn is_situation(&self) -> bool {
        !self.children.is_empty()
    }
}

/// A borrowed view of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<'a> {
    pub parent: VertexId,
    pub child: VertexId,
    pub label: &'a str,
    pub variable: usize,
    pub count: u64,
}

/// How [`EventTree::delete_nodes`] treats the descendants of a deleted vertex.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeletionMode {
    /// Remove the vertex only. Its children are re-attached to its parent,
    /// and children brought together under one parent that share a label
    /// are merged (counts summed, smallest id kept). Deleting every vertex
    /// of a variable below some vertex therefore skips that variable on the
    /// branch while keeping the rest of the process.
    #[default]
    Splice,
    /// Remove the vertex together with its whole subtree.
    Prune,
}

impl FromStr for DeletionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splice" => Ok(Self::Splice),
            "prune" => Ok(Self::Prune),
            other => Err(Error::Config(format!(
                "unknown deletion mode `{other}` (expected splice or prune)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    variables: Vec<String>,
    vertices: BTreeMap<VertexId, Vertex>,
    deleted: BTreeSet<VertexId>,
    area_variable: Option<String>,
    fingerprint: Option<String>,
}

impl EventTree {
    /// Builds the symmetric tree over `columns` of `data`.
    pub fn create(data: &Dataset, columns: &[ColumnRef]) -> Result<Self> {
        Self::from_dataset(&data.select_columns(columns)?)
    }

    /// Builds the symmetric tree over every column of `data`, in order.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let variables = data.columns().to_vec();
        if variables.is_empty() {
            return Err(Error::Construction("no columns selected".into()));
        }
        let mut levels = Vec::with_capacity(variables.len());
        let mut size = 1usize;
        let mut width = 1usize;
        for v in &variables {
            let lv = data.levels(v)?;
            if lv.is_empty() {
                return Err(Error::Construction(format!(
                    "column `{v}` has no category levels"
                )));
            }
            width = width.saturating_mul(lv.len());
            size = size.saturating_add(width);
            levels.push(lv);
        }
        if size > MAX_VERTICES {
            return Err(Error::Construction(format!(
                "symmetric tree would have {size} vertices (limit {MAX_VERTICES})"
            )));
        }
        // Per variable, map each row to the index of its level.
        let coded: Vec<Vec<usize>> = levels
            .iter()
            .enumerate()
            .map(|(j, lv)| {
                data.rows()
                    .iter()
                    .map(|r| lv.binary_search(&r[j]).expect("level of observed value"))
                    .collect()
            })
            .collect();

        let mut vertices = BTreeMap::new();
        vertices.insert(
            VertexId::ROOT,
            Vertex {
                id: VertexId::ROOT,
                parent: None,
                level: 0,
                label: None,
                variable: None,
                count: data.len() as u64,
                children: Vec::new(),
            },
        );
        let mut next_id = 1u32;
        let mut frontier: Vec<(VertexId, Vec<usize>)> =
            vec![(VertexId::ROOT, (0..data.len()).collect())];
        for (j, lv) in levels.iter().enumerate() {
            let mut next_frontier = Vec::with_capacity(frontier.len() * lv.len());
            for (parent, rows) in frontier {
                let mut split = vec![Vec::new(); lv.len()];
                for r in rows {
                    split[coded[j][r]].push(r);
                }
                let mut children = Vec::with_capacity(lv.len());
                for (k, subset) in split.into_iter().enumerate() {
                    let id = VertexId(next_id);
                    next_id += 1;
                    vertices.insert(
                        id,
                        Vertex {
                            id,
                            parent: Some(parent),
                            level: j + 1,
                            label: Some(lv[k].clone()),
                            variable: Some(j),
                            count: subset.len() as u64,
                            children: Vec::new(),
                        },
                    );
                    children.push(id);
                    next_frontier.push((id, subset));
                }
                vertices.get_mut(&parent).expect("parent exists").children = children;
            }
            frontier = next_frontier;
        }
        Ok(Self {
            area_variable: data
                .area_column()
                .filter(|a| variables.iter().any(|v| v == a))
                .map(str::to_string),
            fingerprint: Some(data.fingerprint(&variables)?),
            variables,
            vertices,
            deleted: BTreeSet::new(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// The declared spatial variable, if it is part of the tree.
    pub fn area_variable(&self) -> Option<&str> {
        self.area_variable.as_deref()
    }

    pub fn set_area_variable(&mut self, name: Option<&str>) -> Result<()> {
        if let Some(n) = name {
            if !self.variables.iter().any(|v| v == n) {
                return Err(Error::lookup("variable", n));
            }
        }
        self.area_variable = name.map(str::to_string);
        Ok(())
    }

    /// Order-free digest of the data the counts came from.
    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    pub fn deleted_ids(&self) -> &BTreeSet<VertexId> {
        &self.deleted
    }

    pub fn root(&self) -> &Vertex {
        &self.vertices[&VertexId::ROOT]
    }

    pub fn contains(&self, id: VertexId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn vertex(&self, id: VertexId) -> Result<&Vertex> {
        self.vertices
            .get(&id)
            .ok_or_else(|| Error::lookup("vertex", id.to_string()))
    }

    /// Vertices in id order.
    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Situations (vertices with at least one outgoing edge) in id order.
    pub fn situations(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values().filter(|v| v.is_situation())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values().filter(|v| !v.is_situation())
    }

    pub fn children(&self, id: VertexId) -> impl Iterator<Item = &Vertex> {
        self.vertices[&id]
            .children
            .iter()
            .map(move |c| &self.vertices[c])
    }

    /// Outgoing edge labels of a vertex, in order.
    pub fn out_labels(&self, id: VertexId) -> Vec<&str> {
        self.children(id)
            .map(|c| c.label.as_deref().expect("non-root has a label"))
            .collect()
    }

    /// Outgoing edge counts of a vertex, aligned with [`Self::out_labels`].
    pub fn out_counts(&self, id: VertexId) -> Vec<u64> {
        self.children(id).map(|c| c.count).collect()
    }

    /// Edges ordered by parent id, then label.
    pub fn edges(&self) -> impl Iterator<Item = Edge<'_>> {
        self.vertices.values().flat_map(move |p| {
            p.children.iter().map(move |c| {
                let child = &self.vertices[c];
                Edge {
                    parent: p.id,
                    child: child.id,
                    label: child.label.as_deref().expect("non-root has a label"),
                    variable: child.variable.expect("non-root has a variable"),
                    count: child.count,
                }
            })
        })
    }

    /// Labels along the path from the root.
    pub fn path(&self, id: VertexId) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = &self.vertices[&id];
        while let Some(p) = cur.parent {
            out.push(cur.label.as_deref().expect("non-root has a label"));
            cur = &self.vertices[&p];
        }
        out.reverse();
        out
    }

    /// Every root-to-leaf label sequence.
    pub fn root_to_leaf_paths(&self) -> Vec<Vec<String>> {
        self.leaves()
            .map(|l| self.path(l.id).into_iter().map(str::to_string).collect())
            .collect()
    }

    /// Ids of `id` and all its descendants.
    pub fn subtree(&self, id: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([id]);
        while let Some(v) = queue.pop_front() {
            out.push(v);
            queue.extend(self.vertices[&v].children.iter().copied());
        }
        out
    }

    /// Largest out-degree over all situations.
    pub fn max_out_degree(&self) -> usize {
        self.vertices
            .values()
            .map(|v| v.children.len())
            .max()
            .unwrap_or(0)
    }

    /// Returns a copy of the tree without the given vertices.
    ///
    /// Ids of retained vertices never change. The root cannot be deleted and
    /// every id must name a current vertex.
    pub fn delete_nodes(&self, ids: &[VertexId], mode: DeletionMode) -> Result<Self> {
        for &id in ids {
            if id == VertexId::ROOT {
                return Err(Error::validation("the root s0 cannot be deleted"));
            }
            self.vertex(id)?;
        }
        let mut tree = self.clone();
        match mode {
            DeletionMode::Prune => {
                for &id in ids {
                    if tree.contains(id) {
                        tree.prune(id);
                    }
                }
            }
            DeletionMode::Splice => {
                let mut order: Vec<VertexId> = ids.to_vec();
                order.sort_by_key(|id| (std::cmp::Reverse(self.vertices[id].level), *id));
                order.dedup();
                for id in order {
                    // A vertex merged away by an earlier splice no longer
                    // exists; its replacement carries the same path.
                    if tree.contains(id) {
                        tree.splice(id);
                    }
                }
            }
        }
        Ok(tree)
    }

    fn detach(&mut self, id: VertexId) -> Vertex {
        let v = self.vertices.remove(&id).expect("vertex exists");
        if let Some(p) = v.parent {
            self.vertices
                .get_mut(&p)
                .expect("parent exists")
                .children
                .retain(|c| *c != id);
        }
        v
    }

    fn prune(&mut self, id: VertexId) {
        for v in self.subtree(id) {
            self.deleted.insert(v);
        }
        let v = self.detach(id);
        let mut stack = v.children;
        while let Some(c) = stack.pop() {
            let child = self.vertices.remove(&c).expect("descendant exists");
            stack.extend(child.children);
        }
    }

    fn splice(&mut self, id: VertexId) {
        let v = self.detach(id);
        self.deleted.insert(id);
        let parent = v.parent.expect("root is never spliced");
        for c in v.children {
            self.attach(parent, c);
        }
    }

    /// Hangs `child` (already removed from its old parent's list) below
    /// `parent`, merging with a same-labelled sibling if there is one.
    fn attach(&mut self, parent: VertexId, child: VertexId) {
        let label = self.vertices[&child].label.clone();
        let twin = self.vertices[&parent]
            .children
            .iter()
            .copied()
            .find(|s| self.vertices[s].label == label);
        match twin {
            None => {
                let level = self.vertices[&parent].level + 1;
                self.vertices.get_mut(&child).expect("child exists").parent = Some(parent);
                self.insert_child(parent, child);
                self.relevel(child, level);
            }
            Some(twin) => {
                let (keep, gone) = if twin < child {
                    (twin, child)
                } else {
                    (child, twin)
                };
                if keep == child {
                    let p = self.vertices.get_mut(&parent).expect("parent exists");
                    p.children.retain(|c| *c != twin);
                    self.vertices.get_mut(&child).expect("child exists").parent = Some(parent);
                    self.insert_child(parent, child);
                    let level = self.vertices[&parent].level + 1;
                    self.relevel(child, level);
                }
                self.merge(keep, gone);
            }
        }
    }

    /// Folds `gone` into `keep`; `gone` must already be unlinked from its
    /// parent's child list (or be the twin just replaced).
    fn merge(&mut self, keep: VertexId, gone: VertexId) {
        let g = self.vertices.remove(&gone).expect("merged vertex exists");
        self.deleted.insert(gone);
        self.vertices.get_mut(&keep).expect("kept vertex exists").count += g.count;
        for c in g.children {
            self.attach(keep, c);
        }
    }

    fn insert_child(&mut self, parent: VertexId, child: VertexId) {
        let label = self.vertices[&child].label.clone();
        let pos = {
            let p = &self.vertices[&parent];
            p.children
                .iter()
                .position(|c| self.vertices[c].label > label)
                .unwrap_or(p.children.len())
        };
        self.vertices
            .get_mut(&parent)
            .expect("parent exists")
            .children
            .insert(pos, child);
    }

    fn relevel(&mut self, id: VertexId, level: usize) {
        let mut stack = vec![(id, level)];
        while let Some((v, l)) = stack.pop() {
            let vx = self.vertices.get_mut(&v).expect("vertex exists");
            vx.level = l;
            stack.extend(vx.children.iter().map(|c| (*c, l + 1)));
        }
    }

    pub fn summary(&self) -> TreeSummary {
        let levels: BTreeSet<usize> = self.vertices.values().map(|v| v.level).collect();
        let mut labels: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for e in self.edges() {
            if seen.insert(e.label) {
                labels.push(e.label.to_string());
            }
        }
        TreeSummary {
            node_count: self.node_count(),
            unique_levels: levels.len(),
            edge_count: self.edge_count(),
            unique_labels: labels.len(),
            labels,
        }
    }

    /// Graphviz rendering with `label (count)` on every edge.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph event_tree {\n  rankdir=LR;\n");
        for v in self.vertices.values() {
            let _ = writeln!(out, "  {} [label=\"{}\"];", v.id, v.id);
        }
        for e in self.edges() {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{} ({})\"];",
                e.parent,
                e.child,
                escape_dot(e.label),
                e.count
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            variable_order: self.variables.clone(),
            area_variable: self.area_variable.clone(),
            fingerprint: self.fingerprint.clone(),
            total: self.root().count,
            vertices: self
                .vertices
                .values()
                .map(|v| VertexRecord {
                    id: v.id,
                    level: v.level,
                    path: self.path(v.id).into_iter().map(str::to_string).collect(),
                })
                .collect(),
            edges: self
                .edges()
                .map(|e| EdgeRecord {
                    parent: e.parent,
                    child: e.child,
                    label: e.label.to_string(),
                    variable: self.variables[e.variable].clone(),
                    count: e.count,
                })
                .collect(),
            deleted_ids: self.deleted.iter().copied().collect(),
        }
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self> {
        let mut vertices = BTreeMap::new();
        for (i, rec) in doc.vertices.iter().enumerate() {
            let prev = vertices.insert(
                rec.id,
                Vertex {
                    id: rec.id,
                    parent: None,
                    level: 0,
                    label: None,
                    variable: None,
                    count: 0,
                    children: Vec::new(),
                },
            );
            if prev.is_some() {
                return Err(Error::format(
                    format!("vertices[{i}].id"),
                    format!("duplicate id {}", rec.id),
                ));
            }
        }
        if !vertices.contains_key(&VertexId::ROOT) {
            return Err(Error::format("vertices", "no root s0"));
        }
        vertices.get_mut(&VertexId::ROOT).expect("root").count = doc.total;
        for (i, e) in doc.edges.iter().enumerate() {
            let field = |f: &str| format!("edges[{i}].{f}");
            let variable = doc
                .variable_order
                .iter()
                .position(|v| *v == e.variable)
                .ok_or_else(|| Error::format(field("variable"), "not in variable_order"))?;
            if !vertices.contains_key(&e.parent) {
                return Err(Error::format(field("parent"), "unknown vertex"));
            }
            let child = vertices
                .get_mut(&e.child)
                .ok_or_else(|| Error::format(field("child"), "unknown vertex"))?;
            if child.parent.is_some() || e.child == VertexId::ROOT {
                return Err(Error::format(field("child"), "vertex has two parents"));
            }
            child.parent = Some(e.parent);
            child.label = Some(e.label.clone());
            child.variable = Some(variable);
            child.count = e.count;
            vertices
                .get_mut(&e.parent)
                .expect("checked")
                .children
                .push(e.child);
        }
        let mut tree = Self {
            variables: doc.variable_order,
            vertices,
            deleted: doc.deleted_ids.into_iter().collect(),
            area_variable: doc.area_variable,
            fingerprint: doc.fingerprint,
        };
        // Sort children, assign levels and check reachability.
        let ids: Vec<VertexId> = tree.vertices.keys().copied().collect();
        for id in &ids {
            let mut children = tree.vertices[id].children.clone();
            children.sort_by(|a, b| tree.vertices[a].label.cmp(&tree.vertices[b].label));
            if children
                .windows(2)
                .any(|w| tree.vertices[&w[0]].label == tree.vertices[&w[1]].label)
            {
                return Err(Error::format(
                    "edges",
                    format!("{id} has two children with the same label"),
                ));
            }
            tree.vertices.get_mut(id).expect("exists").children = children;
        }
        tree.relevel(VertexId::ROOT, 0);
        let reachable = tree.subtree(VertexId::ROOT).len();
        if reachable != tree.vertices.len() {
            return Err(Error::format(
                "edges",
                "some vertices are not reachable from s0",
            ));
        }
        if let Some(a) = &tree.area_variable {
            if !tree.variables.contains(a) {
                return Err(Error::format("area_variable", "not in variable_order"));
            }
        }
        for (i, rec) in doc.vertices.iter().enumerate() {
            if tree.vertices[&rec.id].level != rec.level {
                return Err(Error::format(
                    format!("vertices[{i}].level"),
                    "inconsistent with edges",
                ));
            }
        }
        Ok(tree)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| Error::format("tree", e))?;
        Self::from_document(doc)
    }
}

impl Serialize for EventTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}

impl<'de> Deserialize<'de> for EventTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TreeDocument::deserialize(d)?;
        Self::from_document(doc).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// On-disk form of an event tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub variable_order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_variable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    /// Number of data rows (the count reaching the root).
    pub total: u64,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default)]
    pub deleted_ids: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: VertexId,
    pub level: usize,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub parent: VertexId,
    pub child: VertexId,
    pub label: String,
    pub variable: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub node_count: usize,
    pub unique_levels: usize,
    pub edge_count: usize,
    pub unique_labels: usize,
    /// Distinct edge labels in order of first appearance.
    pub labels: Vec<String>,
}

impl fmt::Display for TreeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Summary of Nodes")?;
        writeln!(f, "================")?;
        writeln!(f, "Number of nodes: {}", self.node_count)?;
        writeln!(f, "Unique node levels: {}", self.unique_levels)?;
        writeln!(f)?;
        writeln!(f, "Summary of Edges")?;
        writeln!(f, "================")?;
        writeln!(f, "Number of edges: {}", self.edge_count)?;
        writeln!(f, "Unique labels in edges: {}", self.unique_labels)?;
        writeln!(f)?;
        writeln!(f, "Edge labels")?;
        writeln!(f, "===========")?;
        for l in &self.labels {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}
