//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! The desk-scale experiment constants (image, widths, epochs, lambdas,
//! learning rates) were calibrated once and are frozen here; every run is
//! deterministic.

use std::time::Instant;

use smoothcomp::analysis;
use smoothcomp::compress::{
    compress_conv, compress_joint_stacked, compress_model, compress_model_joint,
    lowest_norm_channels, prune_structured_l1, prune_unstructured_l1, rank_for_sparsity_conv,
    rank_for_sparsity_dense, CompressOptions,
};
use smoothcomp::config::{classify_model, inr_model, ClassifyPreset, InrPreset};
use smoothcomp::data::{image_to_coord_dataset, synth_blob, synth_rings, Dataset};
use smoothcomp::model_io::{load_model, save_model, Provenance};
use smoothcomp::nn::{
    loss_and_grads, train, ActivationKind, BatchTarget, LayerSpec, Loss, LrSchedule, MetricKind,
    Model, OptimizerConfig, TrainConfig,
};
use smoothcomp::regularizers::RegularizerKind;
use smoothcomp::tensor::Tensor;

fn verdict(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Deterministic uniform values in [-1, 1).
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn tensor(&mut self, shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.next_f64()).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient suite
// ---------------------------------------------------------------------------

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Max relative error of analytic vs central-difference gradients over every
/// parameter of the model.
fn max_fd_error(
    model: &mut Model,
    x: &Tensor,
    t: &BatchTarget,
    loss: Loss,
    reg: RegularizerKind,
    lambda: f64,
) -> f64 {
    let eval = loss_and_grads(model, x, t, loss, reg, lambda).unwrap();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let layer_count = model.layers.len();
    for li in 0..layer_count {
        for is_weight in [true, false] {
            let n = {
                let slot = if is_weight {
                    model.layers[li].weight.as_ref()
                } else {
                    model.layers[li].bias.as_ref()
                };
                match slot {
                    Some(t) => t.numel(),
                    None => continue,
                }
            };
            for e in 0..n {
                let read = |m: &Model| {
                    if is_weight {
                        m.layers[li].weight.as_ref().unwrap().data()[e]
                    } else {
                        m.layers[li].bias.as_ref().unwrap().data()[e]
                    }
                };
                let write = |m: &mut Model, v: f64| {
                    let t = if is_weight {
                        m.layers[li].weight.as_mut().unwrap()
                    } else {
                        m.layers[li].bias.as_mut().unwrap()
                    };
                    t.data_mut()[e] = v;
                };
                let orig = read(model);
                write(model, orig + step);
                let up = loss_and_grads(model, x, t, loss, reg, lambda).unwrap().total;
                write(model, orig - step);
                let down = loss_and_grads(model, x, t, loss, reg, lambda).unwrap().total;
                write(model, orig);
                let fd = (up - down) / (2.0 * step);
                let an = if is_weight {
                    eval.grads.weight[li].as_ref().unwrap().data()[e]
                } else {
                    eval.grads.bias[li].as_ref().unwrap().data()[e]
                };
                worst = worst.max(rel_err(an, fd));
            }
        }
    }
    worst
}

/// Smallest relative gap between consecutive singular values over all
/// parameterized layers (flattened weights).
fn min_sigma_gap(model: &Model) -> f64 {
    let mut min_gap = f64::INFINITY;
    for layer in &model.layers {
        let Some(w) = &layer.weight else { continue };
        let flat = smoothcomp::regularizers::flatten_for_reg(w).unwrap();
        let f = flat.svd().unwrap();
        let top = f.sigma()[0].max(1e-12);
        for pair in f.sigma().windows(2) {
            min_gap = min_gap.min((pair[0] - pair[1]) / top);
        }
        min_gap = min_gap.min(f.sigma().last().unwrap() / top);
    }
    min_gap
}

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let mut rng = Lcg(2024);

    // Template A: dense layers, sine activations, logits head, mse loss.
    let mlp = || {
        let mut m = Model::new(
            vec![3],
            vec![
                LayerSpec::dense(3, 12, true),
                LayerSpec::activation(ActivationKind::Sine { omega0: 10.0 }),
                LayerSpec::dense(12, 8, true),
                LayerSpec::activation(ActivationKind::Sine { omega0: 10.0 }),
                LayerSpec::dense(8, 4, true),
                LayerSpec::activation(ActivationKind::Logits),
            ],
        )
        .unwrap();
        m.init_params(41);
        m
    };
    // Template B: conv layers, relu, flatten, cross-entropy.
    let cnn = || {
        let mut m = Model::new(
            vec![2, 6, 6],
            vec![
                LayerSpec::conv2d(2, 4, [3, 3], 2, 1, true),
                LayerSpec::activation(ActivationKind::Relu),
                LayerSpec::conv2d(4, 5, [3, 3], 1, 1, true),
                LayerSpec::activation(ActivationKind::Relu),
                LayerSpec::Flatten,
                LayerSpec::dense(5 * 3 * 3, 3, true),
            ],
        )
        .unwrap();
        m.init_params(43);
        m
    };

    let x_mlp = rng.tensor(&[4, 3]);
    let t_mlp = BatchTarget::Values(rng.tensor(&[4, 4]));
    let x_cnn = rng.tensor(&[3, 2, 6, 6]);
    let t_cnn = BatchTarget::Labels(vec![0, 2, 1]);

    // Nuclear-norm gradients need well-separated singular values; the fixed
    // init seeds above were checked to satisfy this.
    assert!(min_sigma_gap(&mlp()) > 1e-3, "mlp sigma gap too small");
    assert!(min_sigma_gap(&cnn()) > 1e-3, "cnn sigma gap too small");

    let mut worst_std: f64 = 0.0;
    let mut worst_nuc: f64 = 0.0;
    for reg in [
        RegularizerKind::None,
        RegularizerKind::R1,
        RegularizerKind::R2,
        RegularizerKind::Nuc,
    ] {
        for lambda in [0.0, 0.1] {
            let e_mlp = max_fd_error(&mut mlp(), &x_mlp, &t_mlp, Loss::Mse, reg, lambda);
            let e_cnn = max_fd_error(&mut cnn(), &x_cnn, &t_cnn, Loss::CrossEntropy, reg, lambda);
            let worst = e_mlp.max(e_cnn);
            if reg == RegularizerKind::Nuc && lambda > 0.0 {
                worst_nuc = worst_nuc.max(worst);
            } else {
                worst_std = worst_std.max(worst);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_std < 1e-4 && worst_nuc < 1e-3 && elapsed < 60.0;
    verdict(
        1,
        "gradient suite",
        pass,
        &format!(
            "max rel err {worst_std:.2e} (< 1e-4), nuclear {worst_nuc:.2e} (< 1e-3), {elapsed:.1}s (< 60s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: Eckart-Young oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_eckart_young() {
    let start = Instant::now();
    let mut rng = Lcg(7);
    let mut worst_tail: f64 = 0.0;
    for i in 0..200 {
        let m = 1 + (i * 7 + 3) % 12;
        let n = 1 + (i * 5 + 1) % 12;
        let a = rng.tensor(&[m, n]);
        let f = a.svd().unwrap();
        for r in 1..=f.sigma().len() {
            let (w1, w2) = f.truncate(r).unwrap();
            let err = a.sub(&w2.matmul(&w1).unwrap()).unwrap().frobenius_norm();
            let tail: f64 = f.sigma()[r..].iter().map(|s| s * s).sum();
            worst_tail = worst_tail.max((err - tail.sqrt()).abs());
        }
    }

    // Rank-1 truncation beats 10,000 random rank-1 candidates on 3x3 cases,
    // each candidate given its optimal scale.
    let mut beaten = true;
    for _ in 0..20 {
        let a = rng.tensor(&[3, 3]);
        let f = a.svd().unwrap();
        let (w1, w2) = f.truncate(1).unwrap();
        let best = a.sub(&w2.matmul(&w1).unwrap()).unwrap().frobenius_norm();
        for _ in 0..10_000 {
            let u = rng.tensor(&[3, 1]);
            let v = rng.tensor(&[1, 3]);
            let cand = u.matmul(&v).unwrap();
            let norm2 = cand.frobenius_norm().powi(2);
            if norm2 == 0.0 {
                continue;
            }
            let dot: f64 = a.data().iter().zip(cand.data()).map(|(x, y)| x * y).sum();
            let scaled = cand.scale(dot / norm2);
            let err = a.sub(&scaled).unwrap().frobenius_norm();
            if err < best - 1e-12 {
                beaten = false;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_tail < 1e-10 && beaten && elapsed < 60.0;
    verdict(
        2,
        "Eckart-Young oracle",
        pass,
        &format!(
            "tail-energy dev {worst_tail:.2e} (< 1e-10), rank-1 optimum unbeaten by 10k candidates: {beaten}, {elapsed:.1}s (< 60s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: full-rank identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_full_rank_identity() {
    let mut rng = Lcg(31);

    // Layers sized so the sparsity-0 rank resolves to full rank.
    let mut model = Model::new(
        vec![5, 6, 6],
        vec![
            LayerSpec::conv2d(5, 2, [3, 3], 1, 1, true),
            LayerSpec::activation(ActivationKind::Relu),
            LayerSpec::Flatten,
            LayerSpec::dense(2 * 6 * 6, 4, true),
        ],
    )
    .unwrap();
    model.init_params(8);
    let (compressed, report) = compress_model(&model, 0.0, CompressOptions::default()).unwrap();
    assert!(
        report.plan.entries.iter().all(|e| {
            let full = match model.layers[e.layer_index].spec {
                LayerSpec::Dense {
                    in_features,
                    out_features,
                    ..
                } => in_features.min(out_features),
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => out_channels.min(in_channels * kernel[0] * kernel[1]),
                _ => unreachable!(),
            };
            e.rank == Some(full)
        }),
        "sparsity 0 should resolve to full rank for these layer shapes"
    );
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = rng.tensor(&[1, 5, 6, 6]);
        let a = model.forward(&x).unwrap();
        let b = compressed.forward(&x).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }

    // Joint stacking at full rank on a sine network.
    let mut inr = inr_model(
        &InrPreset {
            hidden_width: 16,
            hidden_layers: 2,
            omega0: 10.0,
        },
        3,
    )
    .unwrap();
    inr.init_params(9);
    let joint = compress_joint_stacked(&inr, &[2, 4], 16).unwrap();
    for _ in 0..100 {
        let x = rng.tensor(&[4, 2]);
        let a = inr.forward(&x).unwrap();
        let b = joint.forward(&x).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }

    // A lone conv pair at full rank.
    let mut conv = Model::new(
        vec![3, 5, 5],
        vec![LayerSpec::conv2d(3, 4, [3, 3], 2, 1, true)],
    )
    .unwrap();
    conv.init_params(10);
    let (p, e) = compress_conv(&conv.layers[0], 4).unwrap();
    let pair = Model {
        input_shape: vec![3, 5, 5],
        layers: vec![p, e],
    };
    for _ in 0..100 {
        let x = rng.tensor(&[2, 3, 5, 5]);
        let a = conv.forward(&x).unwrap();
        let b = pair.forward(&x).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }

    let pass = worst < 1e-9;
    verdict(
        3,
        "full-rank identity",
        pass,
        &format!("max abs output deviation {worst:.2e} (< 1e-9) over 300 random inputs"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: sparsity accounting
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_sparsity_accounting() {
    // Eq. 8/9 hand cases reproduce exactly.
    assert_eq!(rank_for_sparsity_dense(4, 4, 0.4).unwrap(), 1);
    assert_eq!(rank_for_sparsity_conv(1, 4, 3, 3, 0.5).unwrap(), 1);

    let mut model = classify_model(&ClassifyPreset::default(), 1, 12, 12).unwrap();
    model.init_params(77);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for i in 1..=9 {
        let target = i as f64 / 10.0;
        let (compressed, report) = compress_model(&model, target, CompressOptions::default()).unwrap();
        // Independent enumeration of every tensor in the compressed model.
        let enumerated: usize = compressed
            .layers
            .iter()
            .map(|l| {
                l.weight.as_ref().map_or(0, Tensor::numel)
                    + l.bias.as_ref().map_or(0, Tensor::numel)
            })
            .sum();
        assert_eq!(enumerated, report.plan.params_after, "accounting mismatch");
        let achieved = 1.0 - enumerated as f64 / model.param_count() as f64;
        let dev = (achieved - target).abs();
        worst = worst.max(dev);
        detail.push_str(&format!("s{target:.1}:{achieved:.3} "));
    }
    let pass = worst <= 0.03;
    verdict(
        4,
        "sparsity accounting",
        pass,
        &format!("max |achieved - target| {worst:.4} (<= 0.03); {detail}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: desk-scale INR regression
// ---------------------------------------------------------------------------

fn train_inr(lambda: f64) -> Model {
    let img = synth_blob(64, 64, 0);
    let train_ds = image_to_coord_dataset(&img, 4).unwrap();
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
        epochs: 2000,
        batch_size: 0,
        schedule: LrSchedule::Cosine { total: None },
        metric_every: 2000,
        seed: 0,
    };
    train(&mut model, &train_ds, &cfg, MetricKind::None).unwrap();
    model
}

fn full_grid_psnr(model: &Model) -> f64 {
    let img = synth_blob(64, 64, 0);
    let full = image_to_coord_dataset(&img, 1).unwrap();
    smoothcomp::nn::evaluate_metric(model, &full, MetricKind::Psnr)
        .unwrap()
        .unwrap()
}

#[test]
fn criterion_5_inr_regression() {
    // The paper-scale PSNR pair (26.8 -> 25.9 at 49% compression) is not
    // reproducible at this image size and width; the desk-scale contract is
    // the drop bound and the ordering below.
    let start = Instant::now();
    let smooth = train_inr(0.3);
    let plain = train_inr(0.0);

    let (smooth_c, report_s) = compress_model_joint(&smooth, 0.5).unwrap();
    let (plain_c, report_p) = compress_model_joint(&plain, 0.5).unwrap();
    assert_eq!(
        report_s.plan.entries[0].rank, report_p.plan.entries[0].rank,
        "both models must compress at the same rank"
    );
    let achieved = report_s.plan.achieved_sparsity;
    assert!(
        (0.4..=0.6).contains(&achieved),
        "joint compression should land near 50%, got {achieved}"
    );

    let drop_smooth = full_grid_psnr(&smooth) - full_grid_psnr(&smooth_c);
    let drop_plain = full_grid_psnr(&plain) - full_grid_psnr(&plain_c);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = drop_smooth <= 2.0 && drop_plain > drop_smooth && elapsed < 600.0;
    verdict(
        5,
        "INR regression",
        pass,
        &format!(
            "smooth drop {drop_smooth:.2} dB (<= 2), unregularized drop {drop_plain:.2} dB (> smooth), achieved sparsity {achieved:.3}, {elapsed:.0}s (< 600s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criteria 6 and 8: classify-preset trends
// ---------------------------------------------------------------------------

fn train_classifier(seed: u64, reg: RegularizerKind, lambda: f64, data: &Dataset) -> Model {
    let mut model = classify_model(&ClassifyPreset::default(), 1, 12, 12).unwrap();
    model.init_params(seed);
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
        seed,
    };
    train(&mut model, data, &cfg, MetricKind::None).unwrap();
    model
}

#[test]
fn criterion_6_spectrum_trend() {
    let start = Instant::now();
    let train_ds = synth_rings(1024, 12, 12, 1000);
    let lambda_large = 0.1;
    let mut detail = String::new();
    let mut pass = true;
    for reg in [RegularizerKind::R1, RegularizerKind::R2] {
        let mut wins = 0;
        for seed in 0..5 {
            let plain = train_classifier(seed, RegularizerKind::None, 0.0, &train_ds);
            let smooth = train_classifier(seed, reg, lambda_large, &train_ds);
            let c_plain = analysis::spectrum(&plain).mean_cumulative_at(0.25).unwrap();
            let c_smooth = analysis::spectrum(&smooth)
                .mean_cumulative_at(0.25)
                .unwrap();
            if c_smooth > c_plain {
                wins += 1;
            }
        }
        detail.push_str(&format!("{reg:?}: {wins}/5 seeds; "));
        if wins < 4 {
            pass = false;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass = pass && elapsed < 900.0;
    verdict(
        6,
        "spectrum trend",
        pass,
        &format!("mean c(25%) strictly higher for the smooth model: {detail}{elapsed:.0}s (< 900s)"),
    );
}

#[test]
fn criterion_8_compressed_accuracy_ordering() {
    // The full-scale Table 1 / Fig. 5 numbers (94.51% accuracy; 91%/85% at
    // 70%/80% sparsity) are intentionally not reproduced at desk scale; the
    // substitute property is the regularized-beats-unregularized ordering
    // under compression at sparsity 0.7.
    let start = Instant::now();
    let train_ds = synth_rings(1024, 12, 12, 1000);
    let test_ds = synth_rings(1024, 12, 12, 2000);
    let mut wins = 0;
    let mut detail = String::new();
    for seed in 0..5 {
        let plain = train_classifier(seed, RegularizerKind::None, 0.0, &train_ds);
        let smooth = train_classifier(seed, RegularizerKind::R2, 0.1, &train_ds);
        let (plain_c, _) = compress_model(&plain, 0.7, CompressOptions::default()).unwrap();
        let (smooth_c, _) = compress_model(&smooth, 0.7, CompressOptions::default()).unwrap();
        let acc_plain = analysis::accuracy(&plain_c, &test_ds).unwrap();
        let acc_smooth = analysis::accuracy(&smooth_c, &test_ds).unwrap();
        if acc_smooth > acc_plain {
            wins += 1;
        }
        detail.push_str(&format!("s{seed}: {acc_smooth:.3} vs {acc_plain:.3}; "));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = wins >= 4 && elapsed < 900.0;
    verdict(
        8,
        "compressed accuracy ordering",
        pass,
        &format!("smooth beats unregularized at sparsity 0.7 in {wins}/5 seeds ({detail}{elapsed:.0}s)"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: baseline correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_baseline_correctness() {
    let mut rng = Lcg(404);
    let mut structured_ok = true;
    let mut unstructured_ok = true;

    for case in 0..100 {
        let n_o = 3 + case % 6;
        let n_i = 2 + case % 4;
        let mut model = Model::new(
            vec![n_i],
            vec![
                LayerSpec::dense(n_i, n_o, true),
                LayerSpec::dense(n_o, 2, true),
            ],
        )
        .unwrap();
        model.init_params(500 + case as u64);
        let sparsity = 0.1 + 0.8 * (case as f64 / 99.0);

        // Independent sort oracle over per-channel L1 norms.
        let w = model.layers[0].weight.as_ref().unwrap();
        let mut norms: Vec<(f64, usize)> = (0..n_o)
            .map(|o| (w.row(o).iter().map(|v| v.abs()).sum(), o))
            .collect();
        norms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let kept = (((1.0 - sparsity) * n_o as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut expect_removed: Vec<usize> =
            norms[..n_o - kept].iter().map(|&(_, i)| i).collect();
        expect_removed.sort_unstable();

        let got = lowest_norm_channels(&model.layers[0], n_o - kept).unwrap();
        if got != expect_removed {
            structured_ok = false;
        }
        // The pruned model keeps exactly the surviving rows, in order.
        let pruned = prune_structured_l1(&model, sparsity).unwrap();
        let pw = pruned.layers[0].weight.as_ref().unwrap();
        let survivors: Vec<usize> =
            (0..n_o).filter(|o| !expect_removed.contains(o)).collect();
        if pw.rows() != survivors.len()
            || survivors
                .iter()
                .enumerate()
                .any(|(row, &o)| pw.row(row) != w.row(o))
        {
            structured_ok = false;
        }

        // Unstructured: exact zero count of the smallest magnitudes.
        let p = (case as f64 / 99.0).clamp(0.0, 1.0);
        let upruned = prune_unstructured_l1(&model, p).unwrap();
        let total: usize = model
            .layers
            .iter()
            .filter_map(|l| l.weight.as_ref())
            .map(Tensor::numel)
            .sum();
        let expected_zeros = (p * total as f64).round() as usize;
        let mut entries: Vec<(f64, usize)> = Vec::new();
        let mut idx = 0;
        for l in &model.layers {
            if let Some(w) = &l.weight {
                for &v in w.data() {
                    entries.push((v.abs(), idx));
                    idx += 1;
                }
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let should_zero: std::collections::BTreeSet<usize> =
            entries[..expected_zeros].iter().map(|&(_, i)| i).collect();
        let mut flat = 0usize;
        let mut zeros = 0usize;
        for l in &upruned.layers {
            if let Some(w) = &l.weight {
                for &v in w.data() {
                    let zeroed = v == 0.0;
                    if zeroed {
                        zeros += 1;
                    }
                    if zeroed != should_zero.contains(&flat) {
                        unstructured_ok = false;
                    }
                    flat += 1;
                }
            }
        }
        if zeros != expected_zeros {
            unstructured_ok = false;
        }
    }
    let _ = &mut rng;
    let pass = structured_ok && unstructured_ok;
    verdict(
        7,
        "baseline correctness",
        pass,
        &format!(
            "structured sort oracle: {structured_ok}, unstructured exact zero set: {unstructured_ok} (100 random models each)"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: determinism & serialization
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism_serialization() {
    let dir = tempfile::tempdir().unwrap();

    // Same (config, seed) twice, through the real training path.
    let run = |tag: &str| {
        let img = synth_blob(24, 24, 3);
        let ds = image_to_coord_dataset(&img, 2).unwrap();
        let mut model = inr_model(
            &InrPreset {
                hidden_width: 12,
                hidden_layers: 1,
                omega0: 10.0,
            },
            1,
        )
        .unwrap();
        model.init_params(5);
        let cfg = TrainConfig {
            loss: Loss::Mse,
            regularizer: RegularizerKind::R1,
            lambda: 0.01,
            optimizer: OptimizerConfig::Adam {
                lr: 0.005,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            epochs: 40,
            batch_size: 16,
            schedule: LrSchedule::Cosine { total: None },
            metric_every: 10,
            seed: 5,
        };
        train(&mut model, &ds, &cfg, MetricKind::Psnr).unwrap();
        let path = dir.path().join(format!("{tag}.json"));
        save_model(
            &model,
            &Provenance {
                lambda: 0.01,
                regularizer: RegularizerKind::R1,
                seed: 5,
            },
            &path,
        )
        .unwrap();
        path
    };
    let a = run("a");
    let b = run("b");
    let bytes = |p: &std::path::Path| {
        (
            std::fs::read(p).unwrap(),
            std::fs::read(p.with_extension("bin")).unwrap(),
        )
    };
    let (ma, sa) = bytes(&a);
    let (mb, sb) = bytes(&b);
    let rerun_identical = ma == mb && sa == sb;

    // save -> load -> save round trip.
    let (loaded, prov) = load_model(&a).unwrap();
    let c = dir.path().join("c.json");
    save_model(&loaded, &prov, &c).unwrap();
    let (mc, sc) = bytes(&c);
    let round_trip_identical = ma == mc && sa == sc;

    let pass = rerun_identical && round_trip_identical;
    verdict(
        9,
        "determinism & serialization",
        pass,
        &format!("rerun byte-identical: {rerun_identical}, save/load/save byte-identical: {round_trip_identical}"),
    );
}
