//! The flagship experiment: nuclear-norm smoothing makes a coordinate
//! network survive joint SVD compression of its stacked hidden layers.
//!
//! Two identical networks fit the same image, one with the mean-singular-
//! value penalty and one without. Both hidden layers are then stacked,
//! factored once, and truncated at a sweep of target sparsities. The smooth
//! model barely moves; the plain one falls apart.
//!
//! Takes a couple of minutes (the penalty needs an SVD per step).
//!
//! ```text
//! cargo run --release --example joint_inr_compression
//! ```

use smoothcomp::compress::compress_model_joint;
use smoothcomp::config::{inr_model, InrPreset};
use smoothcomp::data::{image_to_coord_dataset, synth_blob, Dataset};
use smoothcomp::nn::{
    evaluate_metric, train, Loss, LrSchedule, MetricKind, Model, OptimizerConfig, TrainConfig,
};
use smoothcomp::regularizers::RegularizerKind;

fn fit(lambda: f64, train_ds: &Dataset) -> Model {
    let mut model = inr_model(
        &InrPreset {
            hidden_width: 64,
            hidden_layers: 2,
            omega0: 10.0,
        },
        1,
    )
    .unwrap();
    model.init_params(0);
    let cfg = TrainConfig {
        loss: Loss::Mse,
        regularizer: if lambda > 0.0 {
            RegularizerKind::Nuc
        } else {
            RegularizerKind::None
        },
        lambda,
        optimizer: OptimizerConfig::Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        epochs: 1500,
        batch_size: 0,
        schedule: LrSchedule::Cosine { total: None },
        metric_every: 1500,
        seed: 0,
    };
    train(&mut model, train_ds, &cfg, MetricKind::None).unwrap();
    model
}

fn main() {
    let img = synth_blob(64, 64, 0);
    let train_ds = image_to_coord_dataset(&img, 4).unwrap();
    let full_ds = image_to_coord_dataset(&img, 1).unwrap();
    let psnr = |m: &Model| {
        evaluate_metric(m, &full_ds, MetricKind::Psnr)
            .unwrap()
            .unwrap()
    };

    println!("training the plain model (lambda = 0)...");
    let plain = fit(0.0, &train_ds);
    println!("training the smooth model (nuclear penalty, lambda = 0.3)...");
    let smooth = fit(0.3, &train_ds);

    let p0 = psnr(&plain);
    let s0 = psnr(&smooth);
    println!("\nuncompressed psnr: plain {p0:.2} dB, smooth {s0:.2} dB");
    println!("\ntarget s | achieved | rank | plain psnr | smooth psnr");
    for target in [0.2, 0.35, 0.5, 0.65, 0.8] {
        let (pc, rep) = compress_model_joint(&plain, target).unwrap();
        let (sc, _) = compress_model_joint(&smooth, target).unwrap();
        println!(
            "  {target:.2}   |  {:.3}   |  {:2}  |  {:6.2} dB |  {:6.2} dB",
            rep.plan.achieved_sparsity,
            rep.plan.entries[0].rank.unwrap(),
            psnr(&pc),
            psnr(&sc)
        );
    }
    println!("\n(joint factorization shares one projection across both hidden layers,");
    println!(" counted once in the parameter totals above)");
}
