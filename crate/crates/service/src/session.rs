//! Session state and its archive form.

use cegforge_core::ceg::{CegModel, LabelMode};
use cegforge_core::dataset::{ColumnRef, RowFilter, TimeColumn};
use cegforge_core::event_tree::TreeDocument;
use cegforge_core::spatial::AreaMap;
use cegforge_core::staging::StagingDocument;
use cegforge_core::{CsvOptions, Dataset, Error, EventTree, PriorTable, StagedTreeModel, Staging};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{missing, ApiResult};

pub const ARCHIVE_FORMAT: &str = "cegforge-session";
pub const ARCHIVE_VERSION: u32 = 1;

/// Which columns feed the tree, in level order, plus the area and time
/// designations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRecipe {
    pub label_mode: LabelMode,
    pub updated: bool,
}

/// Links of the artifact chain, upstream first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Link {
    Dataset,
    Columns,
    Filter,
    Tree,
    Staging,
    Priors,
    StagedTree,
    Ceg,
}

#[derive(Debug, Clone, Default)]
pub struct Session {
    pub revision: u64,
    pub csv_options: CsvOptions,
    pub source: Option<Dataset>,
    pub selection: Option<Selection>,
    pub filter: Option<RowFilter>,
    pub tree: Option<EventTree>,
    pub staging: Option<Staging>,
    pub priors: Option<PriorTable>,
    pub staged: Option<StagedTreeModel>,
    pub ceg: Option<CegModel>,
    pub geo: Option<AreaMap>,
}

impl Session {
    /// Drops every artifact downstream of `link`.
    pub fn invalidate_after(&mut self, link: Link) {
        if link < Link::Columns {
            self.selection = None;
        }
        if link < Link::Filter {
            self.filter = None;
        }
        if link < Link::Tree {
            self.tree = None;
        }
        if link < Link::Staging {
            self.staging = None;
        }
        if link < Link::Priors {
            self.priors = None;
        }
        if link < Link::StagedTree {
            self.staged = None;
        }
        if link < Link::Ceg {
            self.ceg = None;
        }
    }

    pub fn source(&self) -> ApiResult<&Dataset> {
        self.source.as_ref().ok_or_else(|| missing("dataset", "upload a dataset"))
    }

    pub fn tree(&self) -> ApiResult<&EventTree> {
        self.tree.as_ref().ok_or_else(|| missing("event tree", "build the tree"))
    }

    pub fn staging(&self) -> ApiResult<&Staging> {
        self.staging.as_ref().ok_or_else(|| missing("staging", "colour the tree"))
    }

    pub fn priors(&self) -> ApiResult<&PriorTable> {
        self.priors.as_ref().ok_or_else(|| missing("prior table", "specify priors"))
    }

    pub fn staged(&self) -> ApiResult<&StagedTreeModel> {
        self.staged.as_ref().ok_or_else(|| missing("staged tree", "build the staged tree"))
    }

    pub fn ceg(&self) -> ApiResult<&CegModel> {
        self.ceg.as_ref().ok_or_else(|| missing("chain event graph", "build the CEG"))
    }

    /// The uploaded data with area and time designations and the row filter
    /// applied.
    pub fn working_data(&self) -> ApiResult<Dataset> {
        let mut data = self.source()?.clone();
        if let Some(sel) = &self.selection {
            data = data.with_area_column(sel.area.as_deref())?;
            data = data.with_time_column(sel.time.clone())?;
        }
        if let Some(f) = &self.filter {
            data = data.filter_rows(f)?;
        }
        Ok(data)
    }

    pub fn tree_columns(&self) -> ApiResult<Vec<ColumnRef>> {
        let names = match &self.selection {
            Some(sel) => sel.columns.clone(),
            None => self.source()?.columns().to_vec(),
        };
        Ok(names.into_iter().map(ColumnRef::Name).collect())
    }

    pub fn build_tree(&self) -> ApiResult<EventTree> {
        Ok(EventTree::create(&self.working_data()?, &self.tree_columns()?)?)
    }

    pub fn to_archive(&self) -> ApiResult<Archive> {
        let staging = match (&self.staging, &self.tree) {
            (Some(s), Some(t)) => Some(s.to_document(t)?),
            _ => None,
        };
        Ok(Archive {
            format: ARCHIVE_FORMAT.to_string(),
            version: ARCHIVE_VERSION,
            csv_options: self.csv_options.clone(),
            source: self.source.clone(),
            selection: self.selection.clone(),
            filter: self.filter.clone(),
            tree: self.tree.as_ref().map(EventTree::to_document),
            staging,
            priors: self.priors.clone(),
            staged_tree: self.staged.as_ref().map(|m| ModelRecipe {
                label_mode: m.label_mode(),
                updated: m.is_updated(),
            }),
            ceg: self.ceg.as_ref().map(|c| c.label_mode),
            geo: self.geo.clone(),
        })
    }

    /// Rebuilds a session from an archive. Derived models are recomputed
    /// from their recipes. The revision starts at 0.
    pub fn from_archive(a: Archive) -> ApiResult<Session> {
        if a.format != ARCHIVE_FORMAT {
            return Err(format_error("format", format!("expected `{ARCHIVE_FORMAT}`")));
        }
        if a.version != ARCHIVE_VERSION {
            return Err(format_error("version", format!("unsupported version {}", a.version)));
        }
        let needs = |present: bool, field: &str, upstream: &str| {
            if present {
                Ok(())
            } else {
                Err(format_error(field, format!("present without `{upstream}`")))
            }
        };
        if a.selection.is_some() || a.filter.is_some() || a.tree.is_some() {
            needs(a.source.is_some(), "tree", "source")?;
        }
        let tree = match a.tree {
            Some(doc) => Some(
                EventTree::from_document(doc).map_err(|e| format_error("tree", e.to_string()))?,
            ),
            None => None,
        };
        let staging = match a.staging {
            Some(doc) => {
                needs(tree.is_some(), "staging", "tree")?;
                let t = tree.as_ref().expect("checked");
                Some(Staging::from_document(&doc, t).map_err(|e| format_error("staging", e.to_string()))?)
            }
            None => None,
        };
        if a.priors.is_some() {
            needs(staging.is_some(), "priors", "staging")?;
        }
        let staged = match a.staged_tree {
            Some(r) => {
                needs(a.priors.is_some(), "staged_tree", "priors")?;
                let m = StagedTreeModel::new(
                    tree.as_ref().expect("checked"),
                    staging.as_ref().expect("checked"),
                    a.priors.as_ref().expect("checked"),
                    r.label_mode,
                )
                .map_err(|e| format_error("staged_tree", e.to_string()))?;
                Some(if r.updated { m.posterior_update() } else { m })
            }
            None => None,
        };
        let ceg = match a.ceg {
            Some(mode) => {
                needs(staged.is_some(), "ceg", "staged_tree")?;
                Some(staged.as_ref().expect("checked").contract().with_label_mode(mode))
            }
            None => None,
        };
        Ok(Session {
            revision: 0,
            csv_options: a.csv_options,
            source: a.source,
            selection: a.selection,
            filter: a.filter,
            tree,
            staging,
            priors: a.priors,
            staged,
            ceg,
            geo: a.geo,
        })
    }
}

/// Structured-text form of a session. Models derived from the prior table
/// are stored as recipes and rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub format: String,
    pub version: u32,
    pub csv_options: CsvOptions,
    #[serde(default)]
    pub source: Option<Dataset>,
    #[serde(default)]
    pub selection: Option<Selection>,
    #[serde(default)]
    pub filter: Option<RowFilter>,
    #[serde(default)]
    pub tree: Option<TreeDocument>,
    #[serde(default)]
    pub staging: Option<StagingDocument>,
    #[serde(default)]
    pub priors: Option<PriorTable>,
    #[serde(default)]
    pub staged_tree: Option<ModelRecipe>,
    #[serde(default)]
    pub ceg: Option<LabelMode>,
    #[serde(default)]
    pub geo: Option<AreaMap>,
}

impl Archive {
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serialises")
    }

    /// Decodes field by field so a failure names the first bad field.
    pub fn from_text(text: &[u8]) -> ApiResult<Self> {
        let value: Value =
            serde_json::from_slice(text).map_err(|e| format_error("archive", e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(format_error("archive", "expected an object"));
        };
        Ok(Archive {
            format: required(&mut obj, "format")?,
            version: required(&mut obj, "version")?,
            csv_options: required(&mut obj, "csv_options")?,
            source: optional(&mut obj, "source")?,
            selection: optional(&mut obj, "selection")?,
            filter: optional(&mut obj, "filter")?,
            tree: optional(&mut obj, "tree")?,
            staging: optional(&mut obj, "staging")?,
            priors: optional(&mut obj, "priors")?,
            staged_tree: optional(&mut obj, "staged_tree")?,
            ceg: optional(&mut obj, "ceg")?,
            geo: optional(&mut obj, "geo")?,
        })
    }
}

fn required<T: DeserializeOwned>(obj: &mut Map<String, Value>, field: &str) -> ApiResult<T> {
    let v = obj.remove(field).ok_or_else(|| format_error(field, "missing"))?;
    serde_json::from_value(v).map_err(|e| format_error(field, e.to_string()))
}

fn optional<T: DeserializeOwned>(obj: &mut Map<String, Value>, field: &str) -> ApiResult<Option<T>> {
    match obj.remove(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| format_error(field, e.to_string())),
    }
}

fn format_error(field: &str, message: impl Into<String>) -> crate::error::ApiError {
    Error::Format { field: field.to_string(), message: message.into() }.into()
}
