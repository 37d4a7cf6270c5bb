//! Command-line pipeline around the `beliefnet` library.

pub mod config;
pub mod demo;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{load_config, validate};
use crate::error::CliError;
use crate::stages::Ctx;

#[derive(Debug, Parser)]
#[command(name = "beliefnet", version, about = "Belief-network estimation pipeline for grouped survey data")]
pub struct Cli {
    /// Pipeline config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Read the survey, rescale items and derive group columns.
    Ingest,
    /// Remove redundant items.
    Uva,
    /// Fit the multigroup model suite for each grouping.
    Fit,
    /// Energy and temperature of every group network.
    Thermo,
    /// Per-belief influence metrics.
    Influence,
    /// Correlate influence with country indicators.
    Correlate,
    /// Summary tables and scatterplots.
    Report,
    /// Write the synthetic demo data set and config to --out.
    Synth,
}

fn out_dir(cli: &Cli, loaded: &config::LoadedConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| loaded.config.output.as_ref().map(|o| loaded.resolve(o)))
        .unwrap_or_else(|| PathBuf::from("beliefnet-out"))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        // Fails only if a pool already exists (e.g. a repeated in-process call).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    if cli.command == Command::Synth {
        let out = cli
            .out
            .clone()
            .ok_or_else(|| CliError::Config("synth needs --out <dir>".into()))?;
        let seed = cli.seed.unwrap_or(0);
        let files = demo::write_demo(&out, seed)?;
        manifest::record_stage(&out, None, seed, "synth", &[], &files)?;
        log::info!("demo written to {}", out.display());
        return Ok(());
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let loaded = load_config(path)?;
    validate(&loaded)?;
    let out = out_dir(cli, &loaded);
    std::fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    let seed = cli.seed.unwrap_or(loaded.config.seed);
    let ctx = Ctx { loaded, out, seed };
    match cli.command {
        Command::Ingest => stages::run_ingest(&ctx),
        Command::Uva => stages::run_uva(&ctx),
        Command::Fit => stages::run_fit(&ctx),
        Command::Thermo => stages::run_thermo(&ctx),
        Command::Influence => stages::run_influence(&ctx),
        Command::Correlate => stages::run_correlate(&ctx),
        Command::Report => stages::run_report(&ctx),
        Command::Synth => unreachable!(),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
