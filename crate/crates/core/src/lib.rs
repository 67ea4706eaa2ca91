//! Chain event graph modelling over categorical data.
//!
//! The crate is organised along the modelling pipeline:
//!
//! - [`dataset`]: load, reorder and filter categorical tables.
//! - [`event_tree`]: build the symmetric event tree and introduce structural
//!   asymmetry by deleting vertices.
//! - [`staging`]: manual stage assignment, agglomerative hierarchical
//!   clustering (AHC) and log marginal likelihood scoring.
//! - [`priors`]: Dirichlet prior tables (custom, uniform, phantom).
//! - [`ceg`]: conjugate updating, contraction to a chain event graph,
//!   reduced graphs, summaries and model comparison.
//! - [`spatial`]: per-area outcome probabilities and choropleth documents.

pub mod ceg;
pub mod colour;
pub mod dataset;
pub mod error;
pub mod event_tree;
pub mod priors;
pub mod score;
pub mod spatial;
pub mod staging;

pub use ceg::{CegModel, LabelMode, ModelComparison, ModelSummary, StagedTreeModel};
pub use colour::Colour;
pub use dataset::{CsvOptions, Dataset, TimeGranularity};
pub use error::{Error, Result};
pub use event_tree::{DeletionMode, EventTree, VertexId};
pub use priors::{PriorMode, PriorTable};
pub use staging::{Staging, StageModel};
