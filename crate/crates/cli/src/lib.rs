//! Command-line scenario runner: reads a TOML config, runs one scenario and
//! writes tab-separated outputs plus a manifest.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod manifest;
pub mod settings;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::Overrides;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use settings::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "rimnull", version, about = "Rim-element null steering for a paraboloid reflector")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Optimizer for nullscan and library; overrides the config.
    #[arg(long, global = true)]
    pub method: Option<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Gain cut of the dish, optionally with a weights file.
    Pattern,
    /// Open-loop null at each angle of a scan.
    Nullscan,
    /// Gain at a fixed angle across frequency for a weights file.
    Freqscan,
    /// Decision error probability: approximation against simulation.
    Theorem1,
    /// Closed-loop annealing against a fixed interferer.
    Closedloop,
    /// Closed-loop annealing against a moving interferer.
    Moving,
    /// Tracking by selecting among precomputed weights.
    Library,
    /// Closed loop warm-started from a mismatched open-loop solution.
    Hybrid,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pattern => "pattern",
            Command::Nullscan => "nullscan",
            Command::Freqscan => "freqscan",
            Command::Theorem1 => "theorem1",
            Command::Closedloop => "closedloop",
            Command::Moving => "moving",
            Command::Library => "library",
            Command::Hybrid => "hybrid",
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let base: PathBuf = cli.config.as_deref().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
    let ov = Overrides { seed: cli.seed, method: cli.method.clone() };
    let job = || commands::execute(cli.command, &file, &base, &ov, &cli.out);
    match cli.threads {
        None => job(),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(job),
    }
}
