//! Batch front end: parses an experiment config, runs the named verification
//! suite, and writes a machine-readable report.
//!
//! `fominlab run config.json` writes `report.json` (the single source of
//! pass/fail) plus any CSV exports into the output directory and exits 0 iff
//! every enabled check passed. `fominlab list` prints the experiment
//! catalog. Identical config and seed produce byte-identical reports.

// validation guards use the `!(x > 0.0)` form on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use report::{Report, RunMeta};

#[derive(Parser)]
#[command(name = "fominlab", version, about = "Monte Carlo verification suites for dissipative additive-noise SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's path count.
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Print the experiment catalog.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers();
    match cli.command {
        Command::List => {
            for (name, anchor, description) in experiments::CATALOG {
                println!("{name:22} {anchor}");
                println!("{:22} {description}", "");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, output_dir, n_paths } => {
            match run(config, seed, output_dir, n_paths) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::FAILURE,
                Err(err) => {
                    eprintln!("error: {err:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

/// Worker-pool size from FOMINLAB_WORKERS (defaults to all cores).
fn init_workers() {
    if let Ok(val) = std::env::var("FOMINLAB_WORKERS") {
        if let Ok(n) = val.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        } else {
            eprintln!("warning: FOMINLAB_WORKERS='{val}' is not a number; ignored");
        }
    }
}

fn run(
    config_path: PathBuf,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    n_paths: Option<usize>,
) -> Result<bool> {
    let text = std::fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = seed {
        config.sim.seed = seed;
    }
    if let Some(dir) = output_dir {
        config.output_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(n) = n_paths {
        config.sim.n_paths = n;
    }

    let kind = config.experiment.kind();
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let started = Instant::now();
    let (checks, artifacts) = experiments::run_experiment(&config, &out_dir)
        .map_err(|e| experiments::contextualize(kind, e))?;
    let wall = started.elapsed().as_secs_f64();

    let report = Report::new(config, checks, artifacts);
    let path = report.write(&out_dir)?;
    RunMeta { wall_clock_seconds: wall }.write(&out_dir)?;

    for check in &report.checks {
        println!(
            "[{}] {:45} value {:+.6e}  bound {:+.6e}  ({})",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.value,
            check.bound,
            check.anchor,
        );
    }
    println!(
        "{}: {} of {} checks passed; report at {}",
        report.experiment,
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len(),
        path.display()
    );
    if !report.pass {
        eprintln!("experiment '{}' has failing checks", report.experiment);
    }
    Ok(report.pass)
}
