//! Compare SVD compression against the structured and unstructured L1
//! pruning baselines on one trained classifier.
//!
//! ```text
//! cargo run --release --example pruning_baselines
//! ```

use smoothcomp::analysis;
use smoothcomp::compress::{
    compress_model, prune_structured_l1, prune_unstructured_l1, CompressOptions,
};
use smoothcomp::config::{classify_model, ClassifyPreset};
use smoothcomp::data::synth_rings;
use smoothcomp::nn::{train, Loss, LrSchedule, MetricKind, OptimizerConfig, TrainConfig};
use smoothcomp::regularizers::RegularizerKind;
use smoothcomp::tensor::Tensor;

fn main() {
    let train_ds = synth_rings(1024, 12, 12, 1000);
    let test_ds = synth_rings(1024, 12, 12, 2000);
    let mut model = classify_model(&ClassifyPreset::default(), 1, 12, 12).unwrap();
    model.init_params(0);
    let cfg = TrainConfig {
        loss: Loss::CrossEntropy,
        regularizer: RegularizerKind::R2,
        lambda: 0.1,
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
    let base_acc = analysis::accuracy(&model, &test_ds).unwrap();
    println!(
        "smooth classifier: {:.3} accuracy, {} parameters\n",
        base_acc,
        model.param_count()
    );

    println!("sparsity | svd acc (params) | structured acc (params) | unstructured acc (zeroed)");
    for target in [0.3, 0.5, 0.7, 0.9] {
        let (svd, rep) = compress_model(&model, target, CompressOptions::default()).unwrap();
        let structured = prune_structured_l1(&model, target).unwrap();
        let unstructured = prune_unstructured_l1(&model, target).unwrap();
        let zeroed: usize = unstructured
            .layers
            .iter()
            .filter_map(|l| l.weight.as_ref())
            .map(|w| w.data().iter().filter(|&&v| v == 0.0).count())
            .sum();
        let weights: usize = unstructured
            .layers
            .iter()
            .filter_map(|l| l.weight.as_ref())
            .map(Tensor::numel)
            .sum();
        println!(
            "  {target:.1}    | {:.3} ({:6})   |  {:.3} ({:6})         |  {:.3} ({zeroed}/{weights})",
            analysis::accuracy(&svd, &test_ds).unwrap(),
            rep.plan.params_after,
            analysis::accuracy(&structured, &test_ds).unwrap(),
            structured.param_count(),
            analysis::accuracy(&unstructured, &test_ds).unwrap(),
        );
    }
    println!("\n(structured pruning keeps the terminal layer's outputs — they are the class logits;");
    println!(" unstructured pruning zeroes entries without shrinking any tensor)");
}
