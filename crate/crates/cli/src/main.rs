//! `forgeloc`: corpus synthesis, training, detection, fusion, evaluation,
//! grid search and reporting over a shared output directory.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Fatal(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    pub fn fatal(e: impl std::fmt::Display) -> Self {
        Self::Fatal(e.to_string())
    }
}

impl From<forgeloc::Error> for CliError {
    fn from(e: forgeloc::Error) -> Self {
        match e {
            forgeloc::Error::InvalidArgument(_) => Self::Usage(e.to_string()),
            _ => Self::Fatal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Fatal(e.to_string())
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_FATAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "forgeloc", version, about = "JPEG forgery localization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set detect.stride=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, env = SEED_ENV, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated detector list.
    #[arg(long, global = true, value_delimiter = ',')]
    detectors: Vec<String>,
    /// Recompute outputs that already exist.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the forgery corpus and its manifest.
    Synth,
    /// Train quality-aware and oblivious first-digit classifiers.
    Train,
    /// Run detectors on every corpus case.
    Detect,
    /// Fuse stored multi-scale first-digit maps.
    Fuse,
    /// Score maps against ground truth.
    Eval,
    /// Search fusion parameters on a sub-corpus.
    Gridsearch,
    /// Write summary tables, heatmaps and ROC points.
    Report,
    /// Print the resolved configuration and its hash.
    Config,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &common.out {
        overrides.push(format!("out_dir={}", toml::Value::String(o.display().to_string())));
    }
    if let Some(t) = common.threads {
        overrides.push(format!("threads={t}"));
    }
    if !common.detectors.is_empty() {
        let list: Vec<toml::Value> =
            common.detectors.iter().map(|d| toml::Value::String(d.trim().to_string())).collect();
        overrides.push(format!("detect.detectors={}", toml::Value::Array(list)));
    }
    // explicit --set flags win over the shorthand flags
    overrides.extend(common.set.iter().cloned());
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let cfg = resolve(&cli.common)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().map_err(CliError::fatal)?;
    }
    let ctx = commands::Context::new(cfg, cli.common.force);
    match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Detect => commands::detect(&ctx),
        Command::Fuse => commands::fuse(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Gridsearch => commands::gridsearch(&ctx),
        Command::Report => commands::report(&ctx),
        Command::Config => commands::show_config(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(o) if o.failed == 0 => ExitCode::SUCCESS,
        Ok(o) => {
            eprintln!("{} of {} units failed", o.failed, o.total);
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e @ CliError::Fatal(_)) => {
            eprintln!("fatal: {e}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
