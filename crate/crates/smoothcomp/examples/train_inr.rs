//! Fit a sine coordinate network to a synthetic image and report PSNR.
//!
//! ```text
//! cargo run --release --example train_inr
//! ```

use smoothcomp::config::{inr_model, InrPreset};
use smoothcomp::data::{image_to_coord_dataset, synth_blob};
use smoothcomp::model_io::{save_model, Provenance};
use smoothcomp::nn::{
    evaluate_metric, train, Loss, LrSchedule, MetricKind, OptimizerConfig, TrainConfig,
};
use smoothcomp::regularizers::RegularizerKind;

fn main() {
    let img = synth_blob(64, 64, 0);
    // Train on every 4th coordinate; evaluate on the full grid.
    let train_ds = image_to_coord_dataset(&img, 4).unwrap();
    let full_ds = image_to_coord_dataset(&img, 1).unwrap();
    println!(
        "fitting a 64x64 image from {} of {} coordinates",
        train_ds.len(),
        full_ds.len()
    );

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
    println!("model: {} parameters", model.param_count());

    let cfg = TrainConfig {
        loss: Loss::Mse,
        regularizer: RegularizerKind::None,
        lambda: 0.0,
        optimizer: OptimizerConfig::Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
        epochs: 1000,
        batch_size: 0,
        schedule: LrSchedule::Cosine { total: None },
        metric_every: 200,
        seed: 0,
    };
    let log = train(&mut model, &train_ds, &cfg, MetricKind::Psnr).unwrap();
    for row in log.iter().filter(|r| r.metric.is_some()) {
        println!(
            "iter {:4}: loss {:.3e}, train psnr {:.2} dB",
            row.epoch,
            row.data_loss,
            row.metric.unwrap()
        );
    }

    let psnr = evaluate_metric(&model, &full_ds, MetricKind::Psnr)
        .unwrap()
        .unwrap();
    println!("full-grid psnr: {psnr:.2} dB");

    let out = std::env::temp_dir().join("smoothcomp_inr_example.json");
    save_model(
        &model,
        &Provenance {
            lambda: 0.0,
            regularizer: RegularizerKind::None,
            seed: 0,
        },
        &out,
    )
    .unwrap();
    println!("model written to {}", out.display());
}
