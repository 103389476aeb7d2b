//! `quasirigid`: command-line front end for the toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{ConfigError, Outcome};
use config::ExperimentConfig;
use output::OutDir;

#[derive(Parser)]
#[command(name = "quasirigid", version, about = "Schottky groups, scattering kernels and quasiconformal distortion")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: the config's `out`, else `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Validate a group and summarize its circles and generators.
    GroupBuild,
    /// Limit-set sample, box dimension and exponent of convergence.
    Limit,
    /// Kernel values at point pairs; optionally the assembled operator.
    Kernel,
    /// Relative-operator norm across a deformation family.
    SrelSweep,
    /// Sample the f_sigma curve.
    Fsigma,
    /// Dimension window and inverted bounds.
    Bounds,
    /// Probe-state pairing for the configured diffeomorphism.
    Probe,
    /// Dimension, dilatation, window and relative norm in one record.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GroupBuild => "group-build",
            Command::Limit => "limit",
            Command::Kernel => "kernel",
            Command::SrelSweep => "srel-sweep",
            Command::Fsigma => "fsigma",
            Command::Bounds => "bounds",
            Command::Probe => "probe",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_ref().context("--config is required").map_err(invalid)?;
    let mut cfg = ExperimentConfig::load(path).map_err(invalid)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building thread pool")?;
    }
    let dir = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let out = OutDir::new(&dir, cfg.hash(), cfg.seed)?;
    match cli.command {
        Command::GroupBuild => commands::group_build(&cfg, &out),
        Command::Limit => commands::limit(&cfg, &out),
        Command::Kernel => commands::kernel(&cfg, &out),
        Command::SrelSweep => commands::srel_sweep_cmd(&cfg, &out),
        Command::Fsigma => commands::fsigma(&cfg, &out),
        Command::Bounds => commands::bounds(&cfg, &out),
        Command::Probe => commands::probe(&cfg, &out),
        Command::Report => commands::report(&cfg, &out),
    }
}

fn invalid(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(&cli);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            eprintln!("{}: {elapsed:.3} s", cli.command.name());
            if outcome.partial_failure {
                eprintln!("error: some rows or items failed; see the output files");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
