//! Thin argument layer over [`crate::commands`].
//!
//! Exit codes: 0 success, 2 bad config/data/arguments, 3 training
//! divergence.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, CompressArgs};
use crate::config::Method;
use crate::error::Error;

#[derive(Parser)]
#[command(
    name = "smoothcomp",
    about = "Smooth-weight training and SVD-based model compression",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a preset model from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compress a trained model at one or more target sparsities.
    Compress {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Comma-separated target sparsities in [0, 1].
        #[arg(long, value_delimiter = ',')]
        sparsity: Vec<f64>,
        /// Evaluation data for the before/after metric columns.
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        labels: Option<String>,
        /// Output directory under the results root.
        #[arg(long)]
        out_dir: Option<String>,
        /// Keep layers whose factorization would grow the parameter count.
        #[arg(long)]
        skip_when_larger: bool,
    },
    /// Write the singular-value spectrum CSV of a model.
    Spectrum {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<String>,
        /// Cumulative curves over sigma^2 instead of sigma.
        #[arg(long)]
        energy: bool,
    },
    /// Evaluate a model on data and print the task metric as JSON.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long)]
        labels: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
}

/// Parse arguments, run, and map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => commands::cmd_train(&config),
        Command::Compress {
            model,
            method,
            sparsity,
            data,
            labels,
            out_dir,
            skip_when_larger,
        } => commands::cmd_compress(&CompressArgs {
            model,
            method,
            sparsities: sparsity,
            data,
            labels,
            out_dir,
            skip_when_larger,
        }),
        Command::Spectrum { model, out, energy } => {
            commands::cmd_spectrum(&model, out.as_deref(), energy)
        }
        Command::Evaluate {
            model,
            data,
            labels,
            out,
        } => commands::cmd_evaluate(&model, &data, labels.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Diverged { .. }) => {
            eprintln!("error: {e}");
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
