//! Command-line front end: `pathwise {fit|denoise|gen|bench|validate}`.

pub mod commands;
pub mod error;
pub mod gen;
pub mod io;

use clap::{Parser, Subcommand};

use commands::bench::{bench, BenchArgs};
use commands::denoise::{denoise, DenoiseArgs};
use commands::gen::{gen, GenArgs};
use commands::regression::{fit, validate, FitArgs, ValidateArgs};
use commands::Common;
pub use error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "pathwise", version, about = "Pathwise coordinate descent for lasso-type problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a penalized regression path to CSV data.
    Fit(FitArgs),
    /// Denoise a graymap with the 2D fused lasso.
    Denoise(DenoiseArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Time solvers over a grid of problem sizes.
    Bench(BenchArgs),
    /// Re-check the optimality of every record in a path file.
    Validate(ValidateArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Fit(a) => &a.common,
            Command::Denoise(a) => &a.common,
            Command::Gen(a) => &a.common,
            Command::Bench(a) => &a.common,
            Command::Validate(a) => &a.common,
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let dispatch = || match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Denoise(a) => denoise(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Validate(a) => validate(a),
    };
    match cli.command.common().jobs {
        Some(0) => Err(CliError::input("--jobs must be positive")),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::input(format!("cannot start {jobs} workers: {e}")))?
            .install(dispatch),
        None => dispatch(),
    }
}
