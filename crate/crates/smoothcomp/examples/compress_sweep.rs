//! Train the ring classifier twice (plain and smooth) and sweep SVD
//! compression over target sparsities, printing accuracy side by side.
//!
//! ```text
//! cargo run --release --example compress_sweep
//! ```

use smoothcomp::analysis;
use smoothcomp::compress::{compress_model, CompressOptions};
use smoothcomp::config::{classify_model, ClassifyPreset};
use smoothcomp::data::{synth_rings, Dataset};
use smoothcomp::nn::{train, Loss, LrSchedule, MetricKind, Model, OptimizerConfig, TrainConfig};
use smoothcomp::regularizers::RegularizerKind;

fn fit(reg: RegularizerKind, lambda: f64, data: &Dataset) -> Model {
    let mut model = classify_model(&ClassifyPreset::default(), 1, 12, 12).unwrap();
    model.init_params(0);
    let cfg = TrainConfig {
        loss: Loss::CrossEntropy,
        regularizer: reg,
        lambda,
        optimizer: OptimizerConfig::Sgd {
            lr: 0.03,
            momentum: 0.9,
            weight_decay: 0.0005,
        },
        epochs: 12,
        batch_size: 32,
        schedule: LrSchedule::Cosine { total: None },
        metric_every: 100,
        seed: 0,
    };
    train(&mut model, data, &cfg, MetricKind::None).unwrap();
    model
}

fn main() {
    let train_ds = synth_rings(1024, 12, 12, 1000);
    let test_ds = synth_rings(1024, 12, 12, 2000);

    println!("training plain and smooth (R2, lambda = 0.1) ring classifiers...");
    let plain = fit(RegularizerKind::None, 0.0, &train_ds);
    let smooth = fit(RegularizerKind::R2, 0.1, &train_ds);
    let acc = |m: &Model| analysis::accuracy(m, &test_ds).unwrap();
    println!(
        "uncompressed: plain {:.3}, smooth {:.3} ({} parameters)",
        acc(&plain),
        acc(&smooth),
        plain.param_count()
    );

    println!("\ntarget s | achieved | params | plain acc | smooth acc");
    for i in 1..=9 {
        let target = i as f64 / 10.0;
        let (pc, rep) = compress_model(&plain, target, CompressOptions::default()).unwrap();
        let (sc, _) = compress_model(&smooth, target, CompressOptions::default()).unwrap();
        println!(
            "  {target:.1}    |  {:.3}   | {:6} |   {:.3}   |   {:.3}",
            rep.plan.achieved_sparsity,
            rep.plan.params_after,
            acc(&pc),
            acc(&sc)
        );
    }
}
