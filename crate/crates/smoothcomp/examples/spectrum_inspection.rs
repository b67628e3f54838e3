//! How the smoothing factor clusters singular values, plus a weight-slice
//! export: train the ring classifier at several lambdas and tabulate the
//! cumulative singular-value percentage at a quarter of each layer's rank.
//!
//! ```text
//! cargo run --release --example spectrum_inspection
//! ```

use smoothcomp::analysis::{self, LayerSpectrum};
use smoothcomp::config::{classify_model, ClassifyPreset};
use smoothcomp::data::synth_rings;
use smoothcomp::nn::{train, Loss, LrSchedule, MetricKind, Model, OptimizerConfig, TrainConfig};
use smoothcomp::regularizers::RegularizerKind;

fn fit(reg: RegularizerKind, lambda: f64) -> Model {
    let train_ds = synth_rings(1024, 12, 12, 1000);
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
    train(&mut model, &train_ds, &cfg, MetricKind::None).unwrap();
    model
}

fn main() {
    println!("regularizer | lambda | mean c(25%) | per-layer c(25%)");
    for (reg, lambda) in [
        (RegularizerKind::None, 0.0),
        (RegularizerKind::R1, 0.05),
        (RegularizerKind::R1, 0.1),
        (RegularizerKind::R2, 0.1),
        (RegularizerKind::R2, 0.3),
        (RegularizerKind::Nuc, 0.1),
    ] {
        let model = fit(reg, lambda);
        let report = analysis::spectrum(&model);
        let per_layer: Vec<String> = report
            .layers
            .iter()
            .map(|l| match l {
                LayerSpectrum::Ok { cumulative, .. } => {
                    let k = (cumulative.len() as f64 * 0.25).round().max(1.0) as usize;
                    format!("{:.2}", cumulative[k.min(cumulative.len()) - 1])
                }
                LayerSpectrum::Failed { .. } => "err".into(),
            })
            .collect();
        println!(
            "  {reg:?}\t| {lambda:.2}  |    {:.3}    | {}",
            report.mean_cumulative_at(0.25).unwrap(),
            per_layer.join(" ")
        );
    }

    // Weight-slice export: the first input channel's kernels of the first
    // conv layer, one row per output channel.
    let smooth = fit(RegularizerKind::R2, 0.1);
    let slice = analysis::weight_slice(&smooth, 0, 0).unwrap();
    let csv = analysis::weight_slice_csv(&slice, 3, 3);
    let path = std::env::temp_dir().join("smoothcomp_weight_slice.csv");
    std::fs::write(&path, &csv).unwrap();
    println!(
        "\nwrote the first conv layer's input-channel-0 kernels ({} output channels) to {}",
        slice.rows(),
        path.display()
    );
}
