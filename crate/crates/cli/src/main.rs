//! Command-line front end for robust ensemble training and verification.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for unreadable datasets
//! or model files, 4 when an exact method exceeds its enumeration cap, and
//! 1 for anything else.

mod data;
mod norms;
mod report;
mod train;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "certree", version, about = "Train and verify robust stump and tree ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a boosted ensemble that minimizes a verified robust loss bound.
    Train(train::TrainArgs),
    /// Bound the robustness of a stored model on every sample of a dataset.
    Verify(verify::VerifyArgs),
    /// Merge verification summaries from a directory into one table.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Report(args) => report::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<certree::Error>() {
        Some(certree::Error::InvalidInput(_)) => 2,
        Some(certree::Error::DimensionMismatch { .. }) => 2,
        Some(certree::Error::DatasetParse { .. }) => 3,
        Some(certree::Error::ModelFormat(_)) => 3,
        Some(certree::Error::ResourceLimit(_)) => 4,
        _ => 1,
    }
}
