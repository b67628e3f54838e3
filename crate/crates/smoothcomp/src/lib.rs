//! Smooth-weight training and fine-tuning-free SVD compression for small
//! neural networks.
//!
//! Training adds a smoothness penalty over each layer's weight rows (the
//! output dimension): a first- or second-order row-difference term, or the
//! mean singular value. Smooth weights cluster their singular-value spectrum,
//! which is what makes the compression step work: each dense or conv layer is
//! replaced by a truncated-SVD factor pair whose rank is solved in closed
//! form from a target sparsity — no fine-tuning afterwards. Structured and
//! unstructured L1 pruning are included as baselines, along with
//! spectrum/PSNR/accuracy analysis and a small CLI.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example low_rank_basics
//! cargo run --release --example train_inr
//! cargo run --release --example joint_inr_compression
//! cargo run --release --example compress_sweep
//! cargo run --release --example pruning_baselines
//! cargo run --release --example spectrum_inspection
//! ```
//!
//! or with the CLI:
//!
//! ```text
//! smoothcomp train --config run.json
//! smoothcomp compress --model model.json --method svd --sparsity 0.3,0.5,0.7
//! smoothcomp spectrum --model model.json
//! smoothcomp evaluate --model model.json --data synth:rings:256:seed1
//! ```

pub mod analysis;
pub mod cli;
pub mod commands;
pub mod compress;
pub mod config;
pub mod data;
pub mod error;
pub mod model_io;
pub mod nn;
pub mod regularizers;
pub mod report;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{SvdFactorization, Tensor};
