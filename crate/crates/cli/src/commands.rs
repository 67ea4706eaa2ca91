//! Pipeline commands. Each struct is both the flag set of a CLI verb and the
//! body of a `[[commands]]` entry in a pipeline config.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Deserializer};

fn default_true() -> bool {
    true
}

fn comma() -> char {
    ','
}

fn double_quote() -> char {
    '"'
}

fn default_mode() -> String {
    "uniform".into()
}

fn default_name_prop() -> String {
    "NAME".into()
}

fn default_palette() -> String {
    "viridis".into()
}

/// Accepts a list mixing column names and 1-based indices.
fn names_or_indices<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Item {
        Index(u64),
        Name(String),
    }
    Ok(Vec::<Item>::deserialize(d)?
        .into_iter()
        .map(|i| match i {
            Item::Index(n) => n.to_string(),
            Item::Name(s) => s,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeBuild {
    /// Delimited input file.
    #[arg(long)]
    pub csv: PathBuf,
    /// The file has no header row; columns are named V1..Vn.
    #[arg(long = "no-header", action = clap::ArgAction::SetFalse)]
    #[serde(default = "default_true")]
    pub header: bool,
    #[arg(long, default_value_t = ',')]
    #[serde(default = "comma")]
    pub sep: char,
    #[arg(long, default_value_t = '"')]
    #[serde(default = "double_quote")]
    pub quote: char,
    #[arg(long)]
    #[serde(default)]
    pub drop_first_col: bool,
    /// Tree variables in level order, by name or 1-based index.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "names_or_indices")]
    pub columns: Vec<String>,
    /// Column holding the area of each row.
    #[arg(long)]
    #[serde(default)]
    pub area_col: Option<String>,
    /// Areas to keep; empty keeps all.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub areas: Vec<String>,
    #[arg(long)]
    #[serde(default)]
    pub time_col: Option<String>,
    /// date, month-year or year.
    #[arg(long)]
    #[serde(default)]
    pub time_granularity: Option<String>,
    /// Percent-style pattern such as %Y-%m-%d.
    #[arg(long)]
    #[serde(default)]
    pub time_format: Option<String>,
    /// Inclusive range as START,END in the time format.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(default)]
    pub time_range: Vec<String>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDelete {
    /// Vertex ids such as s15,s16.
    #[arg(long)]
    pub ids: String,
    /// splice (default) or prune.
    #[arg(long)]
    #[serde(default)]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSet {
    /// One group of vertex ids per flag, e.g. --group s13,s21.
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,
    /// One colour per group, in the same order. Omit to pick colours.
    #[arg(long = "colour")]
    #[serde(default)]
    pub colours: Vec<String>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSet {
    /// custom, uniform or phantom.
    #[arg(long, default_value = "uniform")]
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Row replacement such as u1=200,1000,400,100. Repeatable.
    #[arg(long = "override")]
    #[serde(default)]
    pub overrides: Vec<String>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegBuild {
    /// prior, prior_mean, posterior, posterior_mean or none.
    #[arg(long, default_value = "posterior_mean")]
    #[serde(default)]
    pub label: Option<String>,
    /// Keep the priors as they are instead of adding the counts.
    #[arg(long)]
    #[serde(default)]
    pub no_update: bool,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Also write the graph in DOT.
    #[arg(long)]
    #[serde(default)]
    pub dot: Option<PathBuf>,
    /// Also write the prior-to-posterior update table.
    #[arg(long)]
    #[serde(default)]
    pub update_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegReduce {
    /// Categories every kept path must pass through.
    #[arg(long, value_delimiter = ',', required = true)]
    pub filter: Vec<String>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegCompare {
    /// CEG or summary documents. With one file, the current model is
    /// model 1 and the file is model 2.
    #[arg(num_args = 1..=2, required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBuild {
    /// GeoJSON feature collection.
    #[arg(long)]
    pub geo: PathBuf,
    #[arg(long, default_value = "NAME")]
    #[serde(default = "default_name_prop")]
    pub name_prop: String,
    /// Source CRS of the geometry, e.g. EPSG:27700.
    #[arg(long)]
    #[serde(default)]
    pub crs: Option<String>,
    #[arg(long)]
    pub colour_by: String,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub conditionals: Vec<String>,
    #[arg(long, default_value = "viridis")]
    #[serde(default = "default_palette")]
    pub palette: String,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Also write the per-area probability table.
    #[arg(long)]
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "run")]
pub enum Command {
    #[serde(rename = "tree.build")]
    TreeBuild(TreeBuild),
    #[serde(rename = "tree.delete")]
    TreeDelete(TreeDelete),
    #[serde(rename = "tree.summary")]
    TreeSummary(Report),
    #[serde(rename = "stage.set")]
    StageSet(StageSet),
    #[serde(rename = "stage.ahc")]
    StageAhc(Report),
    #[serde(rename = "stage.summary")]
    StageSummary(Report),
    #[serde(rename = "priors.set")]
    PriorsSet(PriorsSet),
    #[serde(rename = "ceg.build")]
    CegBuild(CegBuild),
    #[serde(rename = "ceg.reduce")]
    CegReduce(CegReduce),
    #[serde(rename = "ceg.summary")]
    CegSummary(Report),
    #[serde(rename = "ceg.compare")]
    CegCompare(CegCompare),
    #[serde(rename = "map.build")]
    MapBuild(MapBuild),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TreeBuild(_) => "tree.build",
            Command::TreeDelete(_) => "tree.delete",
            Command::TreeSummary(_) => "tree.summary",
            Command::StageSet(_) => "stage.set",
            Command::StageAhc(_) => "stage.ahc",
            Command::StageSummary(_) => "stage.summary",
            Command::PriorsSet(_) => "priors.set",
            Command::CegBuild(_) => "ceg.build",
            Command::CegReduce(_) => "ceg.reduce",
            Command::CegSummary(_) => "ceg.summary",
            Command::CegCompare(_) => "ceg.compare",
            Command::MapBuild(_) => "map.build",
        }
    }
}
