use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cegforge_cli::commands::{
    CegBuild, CegCompare, CegReduce, MapBuild, PriorsSet, Report, StageSet, TreeBuild, TreeDelete,
};
use cegforge_cli::{read_overrides, run_pipeline, Command, PipelineConfig, Runner};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cegforge", version, about = "Event trees, staged trees and chain event graphs")]
struct Cli {
    /// Print colour keys as terminal swatches instead of hex codes.
    #[arg(long, global = true)]
    ansi: bool,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    #[command(subcommand)]
    Tree(TreeVerb),
    #[command(subcommand, alias = "staging")]
    Stage(StageVerb),
    #[command(subcommand)]
    Priors(PriorsVerb),
    #[command(subcommand)]
    Ceg(CegVerb),
    #[command(subcommand)]
    Map(MapVerb),
    #[command(subcommand)]
    Pipeline(PipelineVerb),
    /// Start the HTTP service. Flags override CEGFORGE_BIND, CEGFORGE_PORT
    /// and CEGFORGE_MAX_UPLOAD.
    Serve {
        #[arg(long)]
        bind: Option<std::net::IpAddr>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        max_upload: Option<usize>,
    },
}

/// Artifacts read before the verb runs.
#[derive(Args, Default)]
struct Inputs {
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long)]
    staging: Option<PathBuf>,
    #[arg(long)]
    priors: Option<PathBuf>,
    #[arg(long)]
    ceg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TreeVerb {
    /// Build the event tree from a delimited file.
    Build(TreeBuild),
    /// Delete vertices from a tree.
    Delete {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: TreeDelete,
    },
    /// Print node and edge counts.
    Summary {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: Report,
    },
}

#[derive(Subcommand)]
enum StageVerb {
    /// Put groups of situations into stages.
    Set {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: StageSet,
    },
    /// Stage the remaining situations by hierarchical clustering.
    Ahc {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: Report,
    },
    /// Print colour counts and the number of situations left.
    Summary {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: Report,
    },
}

#[derive(Subcommand)]
enum PriorsVerb {
    /// Build the prior table.
    Set {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: PriorsSet,
        /// Read further u<k>=... lines from standard input.
        #[arg(long)]
        interactive: bool,
    },
}

#[derive(Subcommand)]
enum CegVerb {
    /// Update the staged tree and contract it.
    Build {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: CegBuild,
    },
    /// Keep only paths through the given categories.
    Reduce {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: CegReduce,
    },
    /// Print the log marginal likelihood and per-stage ESS.
    Summary {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: Report,
    },
    /// Log Bayes factor of the first model against the second.
    Compare {
        #[command(flatten)]
        args: CegCompare,
    },
}

#[derive(Subcommand)]
enum MapVerb {
    /// Per-area probabilities rendered onto GeoJSON.
    Build {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        args: MapBuild,
    },
}

#[derive(Subcommand)]
enum PipelineVerb {
    /// Run a TOML pipeline config.
    Run {
        config: PathBuf,
        /// Write artifacts here instead of the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load(runner: &mut Runner, inputs: &Inputs) -> Result<()> {
    let w = &mut runner.workspace;
    if let Some(p) = &inputs.tree {
        w.load_tree(p).with_context(|| format!("reading tree {}", p.display()))?;
    }
    if let Some(p) = &inputs.staging {
        w.load_staging(p).with_context(|| format!("reading staging {}", p.display()))?;
    }
    if let Some(p) = &inputs.priors {
        w.load_priors(p).with_context(|| format!("reading priors {}", p.display()))?;
    }
    if let Some(p) = &inputs.ceg {
        w.load_ceg(p).with_context(|| format!("reading CEG {}", p.display()))?;
    }
    Ok(())
}

fn one(runner: &mut Runner, inputs: &Inputs, command: Command) -> Result<()> {
    load(runner, inputs)?;
    runner.run(&command)?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut runner = Runner::new(".");
    runner.ansi = cli.ansi && std::io::stdout().is_terminal();
    let none = Inputs::default();
    match cli.verb {
        Verb::Tree(v) => match v {
            TreeVerb::Build(a) => one(&mut runner, &none, Command::TreeBuild(a))?,
            TreeVerb::Delete { inputs, args } => one(&mut runner, &inputs, Command::TreeDelete(args))?,
            TreeVerb::Summary { inputs, args } => one(&mut runner, &inputs, Command::TreeSummary(args))?,
        },
        Verb::Stage(v) => match v {
            StageVerb::Set { inputs, args } => one(&mut runner, &inputs, Command::StageSet(args))?,
            StageVerb::Ahc { inputs, args } => one(&mut runner, &inputs, Command::StageAhc(args))?,
            StageVerb::Summary { inputs, args } => one(&mut runner, &inputs, Command::StageSummary(args))?,
        },
        Verb::Priors(PriorsVerb::Set { inputs, mut args, interactive }) => {
            if interactive {
                eprintln!("Enter prior rows as u<k>=a,b,...; a blank line ends input.");
                args.overrides.extend(read_overrides(std::io::stdin().lock())?);
            }
            one(&mut runner, &inputs, Command::PriorsSet(args))?
        }
        Verb::Ceg(v) => match v {
            CegVerb::Build { inputs, args } => one(&mut runner, &inputs, Command::CegBuild(args))?,
            CegVerb::Reduce { inputs, args } => one(&mut runner, &inputs, Command::CegReduce(args))?,
            CegVerb::Summary { inputs, args } => one(&mut runner, &inputs, Command::CegSummary(args))?,
            CegVerb::Compare { args } => one(&mut runner, &none, Command::CegCompare(args))?,
        },
        Verb::Map(MapVerb::Build { inputs, args }) => one(&mut runner, &inputs, Command::MapBuild(args))?,
        Verb::Pipeline(PipelineVerb::Run { config, out_dir }) => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = PipelineConfig::from_toml(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            runner = run_pipeline(&cfg, base, out_dir.as_deref())?;
        }
        Verb::Serve { bind, port, max_upload } => {
            let mut config = cegforge_service::Config::from_env()?;
            config.bind = bind.unwrap_or(config.bind);
            config.port = port.unwrap_or(config.port);
            config.max_upload = max_upload.unwrap_or(config.max_upload);
            eprintln!("listening on http://{}", config.addr());
            tokio::runtime::Runtime::new()?.block_on(cegforge_service::serve(config))?;
        }
    }
    match report(&runner) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn report(runner: &Runner) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(runner.log.as_bytes())?;
    for p in &runner.written {
        writeln!(out, "wrote {}", p.display())?;
    }
    out.flush()
}
