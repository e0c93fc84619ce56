//! `kgrefine`: run knowledge-graph embedding experiments from a TOML config.
//!
//! Exit status: 0 ok, 2 usage error, 3 data error, 4 numeric failure.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kgrefine::graph::Format;
use kgrefine_cli::artifact::Status;
use kgrefine_cli::commands::{self, ExportTarget, Stage};
use kgrefine_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "kgrefine", version, about = "Knowledge graph embedding and GNN experiments")]
struct Cli {
    /// Experiment config (TOML, one section per stage).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Text format for exports.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Tsv,
    JsonLines,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => Format::Tsv,
            FormatArg::JsonLines => Format::JsonLines,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load or generate the graph.
    Ingest,
    /// Partition triples (and labeled entities).
    Split,
    /// Train the embedding model.
    TrainKge,
    /// Compute node features.
    Features,
    /// Train the graph network for the configured task.
    TrainGnn,
    /// Run the configured task and write report.json / report.kv.
    Task,
    /// Random hyperparameter search over the [search] section.
    Search,
    /// Write the graph, model embeddings or features as text.
    Export {
        #[arg(value_enum)]
        what: ExportTarget,
        /// Destination file (default: <out>/export.<ext>).
        #[arg(long)]
        to: Option<PathBuf>,
    },
    /// Principal-component coordinates of the features.
    Pca {
        #[arg(long, default_value_t = 2)]
        components: usize,
    },
    /// Merge report.json files (or directories holding them) into a CSV table.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Destination file (default: stdout).
        #[arg(long)]
        to: Option<PathBuf>,
    },
    /// Recompute fingerprints and checksums of the artifacts in the output directory.
    Verify,
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    cfg.out = match &cli.out {
        Some(out) => out.clone(),
        None => base.join(&cfg.out),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let stage = match &cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Split => Some(Stage::Split),
        Command::TrainKge => Some(Stage::TrainKge),
        Command::Features => Some(Stage::Features),
        Command::TrainGnn => Some(Stage::TrainGnn),
        Command::Task => Some(Stage::Task),
        _ => None,
    };
    if let Some(stage) = stage {
        let cfg = load_config(&cli)?;
        if let Some(report) = commands::run_stage(&cfg, stage)? {
            print!("{}", report.to_kv());
        }
        return Ok(());
    }
    match &cli.command {
        Command::Search => {
            let cfg = load_config(&cli)?;
            let log = commands::search(&cfg)?;
            let best = log.result.best_trial();
            println!("best trial {}", best.index);
            for (k, v) in &best.params {
                println!("{k} = {v}");
            }
            if let (Some(obj), Some(space)) = (best.objective, &cfg.search) {
                println!("{} = {obj}", space.objective);
            }
        }
        Command::Export { what, to } => {
            let cfg = load_config(&cli)?;
            let format = Format::from(cli.format);
            let ext = match format {
                Format::Tsv => "tsv",
                Format::JsonLines => "jsonl",
            };
            let to = to.clone().unwrap_or_else(|| cfg.out.join(format!("export.{ext}")));
            commands::export(&cfg, *what, format, &to)?;
            println!("{}", to.display());
        }
        Command::Pca { components } => {
            let cfg = load_config(&cli)?;
            println!("{}", commands::pca(&cfg, *components)?.display());
        }
        Command::Aggregate { inputs, to } => {
            let n = match to {
                Some(path) => {
                    let mut buf = Vec::new();
                    let n = commands::aggregate(inputs, &mut buf)?;
                    kgrefine_cli::artifact::write_atomic(path, &buf)?;
                    n
                }
                None => commands::aggregate(inputs, io::stdout().lock())?,
            };
            eprintln!("aggregated {n} reports");
        }
        Command::Verify => {
            let cfg = load_config(&cli)?;
            let mut bad = 0;
            for (name, status) in commands::verify(&cfg)? {
                let line = match &status {
                    Status::Missing => "absent".to_string(),
                    Status::Current => "ok".to_string(),
                    Status::Stale { found } => format!("stale (fingerprint {found})"),
                    Status::Corrupt(e) => format!("corrupt ({e})"),
                };
                if matches!(status, Status::Stale { .. } | Status::Corrupt(_)) {
                    bad += 1;
                }
                println!("{name}: {line}");
            }
            if bad > 0 {
                return Err(CliError::Data(format!("{bad} artifact(s) failed verification")));
            }
        }
        _ => unreachable!("pipeline stages handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgrefine: {e}");
            e.exit_code()
        }
    }
}
