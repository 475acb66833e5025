//! `coda`: run the common-subspace test on CSV data, reproduce the
//! simulation study, and transform compositions to pivot coordinates.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{CdfArgs, SimulateArgs, TestArgs, TransformArgs};
use output::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "coda",
    version,
    about = "Common principal-component subspace test for compositional data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test a CSV dataset for a common K-dimensional principal subspace.
    Test(TestArgs),
    /// Estimate rejection rates over simulated datasets.
    Simulate(SimulateArgs),
    /// Write pivot coordinates of a CSV dataset, or invert them.
    Transform(TransformArgs),
    /// Compare the simulated null cdf of the statistic with the fitted one.
    Cdf(CdfArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Test(a) => commands::with_jobs(a.common.jobs, || commands::test(&a)),
        Command::Simulate(a) => commands::with_jobs(a.common.jobs, || commands::simulate(&a)),
        Command::Transform(a) => commands::transform(&a),
        Command::Cdf(a) => commands::with_jobs(a.common.jobs, || commands::cdf(&a)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
