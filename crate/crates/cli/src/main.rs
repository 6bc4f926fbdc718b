//! `spde`: batch workflows for the spectral advection-diffusion model.
//!
//! Every subcommand reads a flat `key = value` configuration, writes into a
//! fresh output directory and records a manifest there. Given the same
//! configuration and seed, outputs are byte-identical; the only exception is
//! `timing.txt`, which is left out of the manifest.

mod commands;
mod data;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::run::{Run, RunArgs};

#[derive(Parser)]
#[command(name = "spde", version, about = "Spectral advection-diffusion model: simulation, filtering, fitting, forecasting and scoring")]
struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream; required by stochastic subcommands.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; must not exist yet.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parallel FFT batches.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Overrides a configuration entry; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a latent trajectory and observations.
    Simulate,
    /// Run the Kalman filter and report the log-likelihood.
    Filter,
    /// Maximum-likelihood fit on complete gridded data.
    FitMle,
    /// Bayesian fit by adaptive Metropolis-within-Gibbs.
    FitMcmc {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Predictive samples for the steps after the fitting window.
    Forecast,
    /// CRPS and MAE of a forecast against observations and persistence.
    Score,
    /// Covariance tables and the truncation bound.
    Covariance,
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot set up {t} threads: {e}")))?;
    }
    let name = match &cli.command {
        Command::Simulate => "simulate",
        Command::Filter => "filter",
        Command::FitMle => "fit-mle",
        Command::FitMcmc { .. } => "fit-mcmc",
        Command::Forecast => "forecast",
        Command::Score => "score",
        Command::Covariance => "covariance",
    };
    let run = Run::start(
        name,
        RunArgs {
            config: cli.config.as_deref(),
            overrides: &cli.overrides,
            seed: cli.seed,
            out: cli.out.as_deref(),
        },
    )?;
    match &cli.command {
        Command::Simulate => commands::simulate::run(run),
        Command::Filter => commands::filter::run(run),
        Command::FitMle => commands::fit_mle::run(run),
        Command::FitMcmc { resume } => commands::fit_mcmc::run(run, resume.as_deref()),
        Command::Forecast => commands::forecast::run(run),
        Command::Score => commands::score::run(run),
        Command::Covariance => commands::covariance::run(run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
