//! Command-line front end: run the adaptive learner on built-in or external
//! models, query saved surrogates and benchmark against a global baseline.

mod bench;
mod config;
mod csvio;
mod models;
mod predict;
mod run;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("model evaluation failed: {0}")]
    Model(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o failure: {e}"))
    }
}

impl From<dalpce::learner::LearnerError> for CliError {
    fn from(e: dalpce::learner::LearnerError) -> Self {
        match e {
            dalpce::learner::LearnerError::Model(m) => CliError::Model(m.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dalpce",
    about = "Adaptive domain-decomposed polynomial chaos surrogate modeling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive learner and write the surrogate plus run artifacts.
    Run(run::RunArgs),
    /// Evaluate a saved surrogate on a CSV of points.
    Predict(predict::PredictArgs),
    /// Compare the learner against the global baseline over seeds and budgets.
    Benchmark(bench::BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::execute(args),
        Command::Predict(args) => predict::execute(args),
        Command::Benchmark(args) => bench::execute(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
