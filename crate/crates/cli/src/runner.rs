use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cegforge_core::ceg::{CegModel, ModelComparison, ModelSummary};
use cegforge_core::dataset::{ColumnRef, RowFilter, TimeColumn};
use cegforge_core::event_tree::parse_ids;
use cegforge_core::priors::{parse_override, PriorMode};
use cegforge_core::spatial::{area_probabilities, load_geo, render_map_document};
use cegforge_core::staging::StagingDocument;
use cegforge_core::{
    Colour, CsvOptions, Dataset, DeletionMode, EventTree, LabelMode, PriorTable, StagedTreeModel, Staging,
    TimeGranularity,
};
use serde::Deserialize;

use crate::commands::*;
use crate::{CliError, Result};

/// A scripted run: commands executed in order against one workspace.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Where artifacts go. Relative to the config file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub commands: Vec<Command>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Artifacts carried from one command to the next.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub tree: Option<EventTree>,
    pub staging: Option<Staging>,
    pub priors: Option<PriorTable>,
    pub model: Option<StagedTreeModel>,
    pub ceg: Option<CegModel>,
}

impl Workspace {
    fn tree(&self) -> Result<&EventTree> {
        self.tree.as_ref().ok_or_else(|| CliError::Missing("an event tree (run tree.build or pass --tree)".into()))
    }

    fn staging(&self) -> Result<&Staging> {
        self.staging.as_ref().ok_or_else(|| CliError::Missing("a staging (run stage.set or stage.ahc, or pass --staging)".into()))
    }

    fn priors(&self) -> Result<&PriorTable> {
        self.priors.as_ref().ok_or_else(|| CliError::Missing("a prior table (run priors.set or pass --priors)".into()))
    }

    fn ceg(&self) -> Result<&CegModel> {
        self.ceg.as_ref().ok_or_else(|| CliError::Missing("a CEG (run ceg.build or pass --ceg)".into()))
    }

    fn set_tree(&mut self, tree: EventTree) {
        *self = Workspace { tree: Some(tree), ..Workspace::default() };
    }

    fn set_staging(&mut self, staging: Staging) {
        self.staging = Some(staging);
        self.priors = None;
        self.model = None;
        self.ceg = None;
    }

    fn set_priors(&mut self, priors: PriorTable) {
        self.priors = Some(priors);
        self.model = None;
        self.ceg = None;
    }

    pub fn load_tree(&mut self, path: &Path) -> Result<()> {
        self.set_tree(EventTree::from_json(&read(path)?)?);
        Ok(())
    }

    pub fn load_staging(&mut self, path: &Path) -> Result<()> {
        let doc: StagingDocument = serde_json::from_str(&read(path)?)
            .map_err(|e| CliError::Document { path: path.to_path_buf(), message: e.to_string() })?;
        let s = Staging::from_document(&doc, self.tree()?)?;
        self.set_staging(s);
        Ok(())
    }

    pub fn load_priors(&mut self, path: &Path) -> Result<()> {
        self.set_priors(PriorTable::from_delimited(&read(path)?, b',')?);
        Ok(())
    }

    pub fn load_ceg(&mut self, path: &Path) -> Result<()> {
        self.ceg = Some(CegModel::from_json(&read(path)?)?);
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

/// Model summary from either a summary document or a CEG document.
pub fn read_summary(path: &Path) -> Result<ModelSummary> {
    let text = read(path)?;
    ModelSummary::from_json(&text)
        .or_else(|_| CegModel::from_json(&text).map(|c| c.summary()))
        .map_err(|_| CliError::Document {
            path: path.to_path_buf(),
            message: "neither a model summary nor a CEG document".into(),
        })
}

/// Executes commands, writing artifacts and collecting printed output.
#[derive(Debug)]
pub struct Runner {
    /// Base for relative input paths.
    pub base: PathBuf,
    /// In pipeline mode every command writes its artifacts here, under a
    /// default name unless `out` is given. Without it only explicit `out`
    /// paths are written, relative to `base`.
    pub output_dir: Option<PathBuf>,
    /// Colour keys use terminal escapes instead of plain hex codes.
    pub ansi: bool,
    pub workspace: Workspace,
    pub log: String,
    pub written: Vec<PathBuf>,
}

impl Runner {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self {
            base: base.into(),
            output_dir: None,
            ansi: false,
            workspace: Workspace::default(),
            log: String::new(),
            written: Vec::new(),
        }
    }

    fn input(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    /// Resolves where an artifact goes, or `None` when it is not written.
    fn output(&self, explicit: &Option<PathBuf>, default: &str) -> Option<PathBuf> {
        match (&self.output_dir, explicit) {
            (Some(dir), Some(p)) => Some(dir.join(p)),
            (Some(dir), None) => Some(dir.join(default)),
            (None, Some(p)) => Some(self.base.join(p)),
            (None, None) => None,
        }
    }

    fn write(&mut self, explicit: &Option<PathBuf>, default: &str, contents: &str) -> Result<()> {
        if let Some(path) = self.output(explicit, default) {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Io { path: parent.to_path_buf(), message: e.to_string() })?;
            }
            std::fs::write(&path, contents)
                .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
            self.written.push(path);
        }
        Ok(())
    }

    fn print(&mut self, block: &str) {
        if !self.log.is_empty() {
            self.log.push('\n');
        }
        self.log.push_str(block);
        if !block.ends_with('\n') {
            self.log.push('\n');
        }
    }

    pub fn run_all(&mut self, commands: &[Command]) -> Result<()> {
        for (i, c) in commands.iter().enumerate() {
            self.run(c).map_err(|e| CliError::Step { index: i + 1, command: c.name(), source: Box::new(e) })?;
        }
        Ok(())
    }

    pub fn run(&mut self, command: &Command) -> Result<()> {
        match command {
            Command::TreeBuild(c) => self.tree_build(c),
            Command::TreeDelete(c) => {
                let ids = parse_ids(&c.ids)?;
                let mode: DeletionMode = c.mode.as_deref().map_or(Ok(DeletionMode::default()), str::parse)?;
                let tree = self.workspace.tree()?.delete_nodes(&ids, mode)?;
                self.finish_tree(tree, &c.out)
            }
            Command::TreeSummary(c) => {
                let text = self.workspace.tree()?.summary().to_string();
                self.print(&text);
                self.write(&c.out, "tree_summary.txt", &text)
            }
            Command::StageSet(c) => {
                let groups = c.groups.iter().map(|g| parse_ids(g)).collect::<cegforge_core::Result<Vec<_>>>()?;
                let colours = c.colours.iter().map(|s| s.parse()).collect::<cegforge_core::Result<Vec<Colour>>>()?;
                let base = self.workspace.staging.clone().unwrap_or_default();
                let next = base.assign_stages(
                    self.workspace.tree()?,
                    &groups,
                    (!colours.is_empty()).then_some(colours.as_slice()),
                )?;
                self.finish_staging(next, &c.out)
            }
            Command::StageAhc(c) => {
                let base = self.workspace.staging.clone().unwrap_or_default();
                let out = base.run_ahc(self.workspace.tree()?, None)?;
                let mut text = format!("AHC accepted {} merge(s)\n", out.steps.len());
                for s in &out.steps {
                    let ids = |v: &[cegforge_core::VertexId]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
                    let _ = writeln!(text, "  {{{}}} + {{{}}}  logBF {:.4}", ids(&s.first), ids(&s.second), s.log_bayes_factor);
                }
                self.print(&text);
                self.finish_staging(out.staging, &c.out)
            }
            Command::StageSummary(c) => {
                let text = self.workspace.staging()?.summary(self.workspace.tree()?).to_string();
                self.print(&text);
                self.write(&c.out, "staging_summary.txt", &text)
            }
            Command::PriorsSet(c) => self.priors_set(c),
            Command::CegBuild(c) => self.ceg_build(c),
            Command::CegReduce(c) => {
                let cats: Vec<&str> = c.filter.iter().map(String::as_str).collect();
                let r = self.workspace.ceg()?.reduced(&cats)?;
                self.print(&format!(
                    "Reduced CEG for {}: {} positions, {} paths\n",
                    c.filter.join(", "),
                    r.positions.len(),
                    r.paths().len()
                ));
                self.write(&c.out, "reduced_ceg.json", &r.to_json())
            }
            Command::CegSummary(c) => {
                let s = self.workspace.ceg()?.summary();
                let text = s.to_string();
                self.print(&text);
                self.write(&c.out, "summary.json", &s.to_json())?;
                if self.output_dir.is_some() {
                    self.write(&None, "summary.txt", &text)?;
                }
                Ok(())
            }
            Command::CegCompare(c) => {
                let (a, b) = match c.files.as_slice() {
                    [one] => (self.workspace.ceg()?.summary(), read_summary(&self.input(one))?),
                    [one, two] => (read_summary(&self.input(one))?, read_summary(&self.input(two))?),
                    _ => return Err(CliError::Config("ceg compare takes one or two files".into())),
                };
                let text = ModelComparison::new(&a, &b).to_string();
                self.print(&text);
                self.write(&c.out, "comparison.txt", &text)
            }
            Command::MapBuild(c) => self.map_build(c),
        }
    }

    fn tree_build(&mut self, c: &TreeBuild) -> Result<()> {
        let byte = |ch: char, what: &str| -> Result<u8> {
            u8::try_from(ch)
                .ok()
                .filter(u8::is_ascii)
                .ok_or_else(|| CliError::Config(format!("{what} must be an ASCII character")))
        };
        let options = CsvOptions {
            header: c.header,
            separator: byte(c.sep, "sep")?,
            quote: byte(c.quote, "quote")?,
            exclude_first_column: c.drop_first_col,
        };
        let path = self.input(&c.csv);
        let file = std::fs::File::open(&path).map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        let mut data = Dataset::load_csv(file, &options)?.with_area_column(c.area_col.as_deref())?;
        let time = match (&c.time_col, &c.time_granularity) {
            (Some(col), g) => {
                let g: TimeGranularity = g.as_deref().unwrap_or("date").parse()?;
                Some(TimeColumn::new(col.clone(), g, c.time_format.clone().unwrap_or_default()))
            }
            (None, Some(_)) => return Err(CliError::Config("time granularity given without a time column".into())),
            (None, None) => None,
        };
        data = data.with_time_column(time)?;
        let filter = RowFilter {
            areas: c.areas.iter().cloned().collect(),
            time_range: match c.time_range.as_slice() {
                [] => None,
                [a, b] => Some((a.clone(), b.clone())),
                _ => return Err(CliError::Config("time range needs a start and an end".into())),
            },
        };
        data = data.filter_rows(&filter)?;
        let columns: Vec<ColumnRef> = if c.columns.is_empty() {
            data.columns().iter().map(|n| ColumnRef::Name(n.clone())).collect()
        } else {
            c.columns.iter().map(|s| ColumnRef::parse(s)).collect()
        };
        let tree = EventTree::create(&data, &columns)?;
        self.finish_tree(tree, &c.out)
    }

    fn finish_tree(&mut self, tree: EventTree, out: &Option<PathBuf>) -> Result<()> {
        let text = tree.summary().to_string();
        let json = tree.to_json();
        self.workspace.set_tree(tree);
        self.print(&text);
        self.write(out, "tree.json", &json)
    }

    fn finish_staging(&mut self, staging: Staging, out: &Option<PathBuf>) -> Result<()> {
        let tree = self.workspace.tree()?;
        let text = staging.summary(tree).to_string();
        let doc = serde_json::to_string_pretty(&staging.to_document(tree)?).expect("staging serialises");
        self.workspace.set_staging(staging);
        self.print(&text);
        self.write(out, "staging.json", &doc)
    }

    fn priors_set(&mut self, c: &PriorsSet) -> Result<()> {
        let mode: PriorMode = c.mode.parse()?;
        let overrides: BTreeMap<usize, Vec<f64>> =
            c.overrides.iter().map(|o| parse_override(o)).collect::<cegforge_core::Result<_>>()?;
        let table = PriorTable::specify(self.workspace.tree()?, self.workspace.staging()?, mode, &overrides)?;
        let text = format!("{table}\n{}", colour_key(&table, self.ansi));
        let csv = table.to_delimited(b',');
        self.workspace.set_priors(table);
        self.print(&text);
        self.write(&c.out, "priors.csv", &csv)
    }

    fn ceg_build(&mut self, c: &CegBuild) -> Result<()> {
        let mode: LabelMode = c.label.as_deref().map_or(Ok(LabelMode::default()), str::parse)?;
        let w = &self.workspace;
        let model = StagedTreeModel::new(w.tree()?, w.staging()?, w.priors()?, mode)?;
        let model = if c.no_update { model } else { model.posterior_update() };
        let ceg = model.contract();
        let summary = ceg.summary().to_string();
        let (json, dot, table) = (ceg.to_json(), ceg.to_dot(), model.update_table().to_delimited(b','));
        self.workspace.model = Some(model);
        self.workspace.ceg = Some(ceg);
        self.print(&summary);
        self.write(&c.out, "ceg.json", &json)?;
        self.write(&c.dot, "ceg.dot", &dot)?;
        self.write(&c.update_table, "update_table.csv", &table)
    }

    fn map_build(&mut self, c: &MapBuild) -> Result<()> {
        let ceg = self.workspace.ceg()?;
        let conds: Vec<&str> = c.conditionals.iter().map(String::as_str).collect();
        let table = area_probabilities(ceg, &c.colour_by, &conds)?;
        let geo_path = self.input(&c.geo);
        let bytes = std::fs::read(&geo_path).map_err(|e| CliError::Io { path: geo_path, message: e.to_string() })?;
        let mut map = load_geo(&bytes, &c.name_prop, c.crs.as_deref())?;
        map.match_areas(&table.areas())?;
        let doc = render_map_document(&map, &table, &c.palette, &c.colour_by)?;
        let mut text = format!(
            "Map of P({}) over {} areas; {} of {} features matched\n",
            c.colour_by,
            table.areas().len(),
            map.matched_count(),
            map.features.len()
        );
        if !map.unmatched().is_empty() {
            let _ = writeln!(text, "Unmatched features: {}", map.unmatched().join(", "));
        }
        self.print(&text);
        self.write(&c.out, "map.geojson", &serde_json::to_string_pretty(&doc).expect("map serialises"))?;
        self.write(&c.table, "area_probabilities.csv", &table.to_delimited(b','))
    }
}

/// One line per stage with its colour as a hex code, or as a coloured
/// swatch when `ansi` is set.
pub fn colour_key(table: &PriorTable, ansi: bool) -> String {
    let mut out = String::from("Stage Colour Key\n");
    for r in &table.rows {
        if ansi {
            let [red, green, blue] = r.colour.channels();
            let _ = writeln!(out, "\x1b[48;2;{red};{green};{blue}m    \x1b[0m {} {}", r.stage, r.colour);
        } else {
            let _ = writeln!(out, "[{}] {}", r.colour, r.stage);
        }
    }
    out
}

/// Runs a pipeline config. `base` resolves relative paths in the config;
/// `output_dir` overrides the config's own.
pub fn run_pipeline(config: &PipelineConfig, base: &Path, output_dir: Option<&Path>) -> Result<Runner> {
    let mut runner = Runner::new(base);
    let dir = output_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| base.to_path_buf());
    runner.output_dir = Some(dir);
    runner.run_all(&config.commands)?;
    Ok(runner)
}

/// Reads `key=values` override lines until a blank line or end of input.
pub fn read_overrides(input: impl std::io::BufRead) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| CliError::Io { path: PathBuf::from("<stdin>"), message: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() {
            break;
        }
        parse_override(line)?;
        out.push(line.to_string());
    }
    Ok(out)
}
