//! Batch pipelines and command-line verbs.
//!
//! A pipeline config is a TOML file with an optional `output_dir` and an
//! ordered list of `[[commands]]`, each tagged with `run = "<verb>"`:
//!
//! ```toml
//! output_dir = "out"
//!
//! [[commands]]
//! run = "tree.build"
//! csv = "homicides.csv"
//! columns = [3, 2, 4, 5]
//!
//! [[commands]]
//! run = "stage.ahc"
//!
//! [[commands]]
//! run = "priors.set"
//! mode = "uniform"
//!
//! [[commands]]
//! run = "ceg.build"
//! ```

pub mod commands;
mod runner;

use std::path::PathBuf;

pub use commands::Command;
pub use runner::{colour_key, read_overrides, read_summary, run_pipeline, PipelineConfig, Runner, Workspace};

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cegforge_core::Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{path}: {message}")]
    Document { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    Missing(String),

    #[error("command {index} ({command}): {source}")]
    Step {
        index: usize,
        command: &'static str,
        source: Box<CliError>,
    },
}
