//! `cardex`: dataset preparation, evaluation, extraction and serving.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 no card found.

mod commands;
mod failure;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cardex",
    version,
    about = "Identity-card field extraction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded, stratified train/validation split of an image folder
    Split(commands::split::Args),
    /// Score a detection dump: report JSON plus PR/F1 curves CSV
    Evaluate(commands::evaluate::Args),
    /// Extract fields from a front and back card photo
    Extract(commands::extract::Args),
    /// Verify loss and optimizer kernels against finite differences
    KernelCheck(commands::kernel_check::Args),
    /// Apply image operators to a single image
    Preprocess(commands::preprocess::Args),
    /// Apply label-preserving augmentations to an image folder
    Augment(commands::augment::Args),
    /// Run the REST service
    Serve(commands::serve::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Split(a) => commands::split::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Extract(a) => commands::extract::run(a),
        Command::KernelCheck(a) => commands::kernel_check::run(a),
        Command::Preprocess(a) => commands::preprocess::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::Serve(a) => commands::serve::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
