//! Command-line harness for the relaxed indicator matrix toolbox: a
//! retraction timing sweep plus the norm approximation, TV denoising, and
//! Ratio Cut clustering experiments.

pub mod approx;
pub mod bench;
pub mod config;
pub mod denoise;
pub mod error;
pub mod pgm;
pub mod ratiocut;
pub mod util;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "rim", about = "Relaxed indicator matrix optimization experiments")]
pub struct Cli {
    /// Optional key=value config file; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time the three retractions across sizes and bound modes
    RetractBench(bench::BenchArgs),
    /// Norm approximation of a random row-stochastic target
    Approx(approx::ApproxArgs),
    /// Total-variation denoising of a PGM image
    Denoise(denoise::DenoiseArgs),
    /// Ratio Cut clustering of a CSV dataset
    Ratiocut(ratiocut::RatiocutArgs),
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = config::Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::RetractBench(args) => bench::run(args, &cfg),
        Command::Approx(args) => approx::run(args, &cfg),
        Command::Denoise(args) => denoise::run(args, &cfg),
        Command::Ratiocut(args) => ratiocut::run(args, &cfg),
    }
}
