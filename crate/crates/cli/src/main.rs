mod cli;
mod commands;
mod experiments;
mod manifest;
mod text;

use clap::Parser;
use resvar::Error;

use crate::cli::{Cli, Command};

/// Exit codes: 0 success, 2 usage, 3 I/O, 4 model failure, 5 data contract
/// violation.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::FitFailure { .. }
        | Error::SingularDesign
        | Error::SingularBasis
        | Error::NonFiniteLoss { .. }
        | Error::LeverageOne { .. }
        | Error::DegenerateGenerator
        | Error::EmptyOutOfBag { .. }
        | Error::NegativeImprovement { .. } => 4,
        Error::LengthMismatch { .. }
        | Error::SampleTooSmall { .. }
        | Error::NonFinite { .. }
        | Error::DegenerateSample { .. }
        | Error::DegenerateCorrelation
        | Error::Parse(_)
        | Error::Json(_)
        | Error::UnknownColumn { .. }
        | Error::NonPositiveTarget { .. }
        | Error::EmptyFeatureSet
        | Error::DimensionMismatch { .. } => 5,
        Error::InvalidConfig(_)
        | Error::InvalidDf { .. }
        | Error::InvalidCorrelation { .. }
        | Error::InvalidNesting { .. }
        | Error::Unsupported(_) => 2,
    }
}

fn run(cli: &Cli) -> resvar::Result<()> {
    match &cli.command {
        Command::Generate(args) => commands::run_generate(args),
        Command::Preprocess(args) => commands::run_preprocess(args),
        Command::Train(args) => commands::run_train(args),
        Command::Residuals(args) => commands::run_residuals(args),
        Command::Test(args) => commands::run_test(args),
        Command::Experiment(args) => experiments::run_experiment(args).map(|_| ()),
        Command::Montecarlo(args) => commands::run_montecarlo(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
