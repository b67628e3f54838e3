//! Fine-tuning-free model compression.
//!
//! Dense and conv layers are replaced by a truncated-SVD factor pair whose
//! rank is solved in closed form from a target sparsity. The first factor
//! projects into the rank-r subspace (no bias); the second restores the
//! output dimension and carries the original bias. Conv layers factor through
//! the row-per-kernel flattening into a rank-r conv plus a 1x1 conv.
//!
//! Negative achieved sparsity (factorization overhead exceeding savings) is
//! reported, not hidden; `skip_when_larger` opts out per layer.

mod prune;

pub use prune::{lowest_norm_channels, prune_structured_l1, prune_unstructured_l1};

use std::time::Duration;

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, Model};
use crate::regularizers::flatten_for_reg;
use crate::tensor::Tensor;

/// Truncation rank for a dense layer hitting target sparsity `s`:
/// `round(((1-s)*(n_i*n_o + n_o) - n_o) / (n_i + n_o))`, clamped to
/// `[1, min(n_i, n_o)]`.
pub fn rank_for_sparsity_dense(n_i: usize, n_o: usize, s: f64) -> Result<usize> {
    check_sparsity(s)?;
    let total = (n_i * n_o + n_o) as f64;
    let raw = ((1.0 - s) * total - n_o as f64) / (n_i + n_o) as f64;
    Ok(clamp_rank(raw, n_i.min(n_o)))
}

/// Truncation rank for a conv layer hitting target sparsity `s`:
/// `round(((1-s)*(n_o*n_i*h*w + n_o) - n_o) / (n_i*h*w + n_o))`, clamped to
/// `[1, min(n_o, n_i*h*w)]`. With a 1x1 kernel this reduces to the dense
/// formula.
pub fn rank_for_sparsity_conv(n_i: usize, n_o: usize, h: usize, w: usize, s: f64) -> Result<usize> {
    check_sparsity(s)?;
    let k = n_i * h * w;
    let total = (n_o * k + n_o) as f64;
    let raw = ((1.0 - s) * total - n_o as f64) / (k + n_o) as f64;
    Ok(clamp_rank(raw, n_o.min(k)))
}

fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::arg(format!("target sparsity {s} outside [0, 1]")));
    }
    Ok(())
}

fn clamp_rank(raw: f64, max_rank: usize) -> usize {
    // Round half up, then clamp; the clamp absorbs negative extremes.
    let r = (raw + 0.5).floor();
    if r < 1.0 {
        1
    } else {
        (r as usize).min(max_rank)
    }
}

/// Replace one dense layer by its rank-`r` factor pair.
///
/// The projection `w1 = diag(sigma_r) v_r^T` has no bias; the expansion
/// `w2 = u_r` keeps the original bias.
pub fn compress_dense(layer: &Layer, r: usize) -> Result<(Layer, Layer)> {
    let LayerSpec::Dense {
        in_features,
        out_features,
        has_bias,
        ..
    } = layer.spec
    else {
        return Err(Error::arg("compress_dense needs a dense layer"));
    };
    let w = layer.weight.as_ref().expect("dense weight");
    if r == 0 || r > in_features.min(out_features) {
        return Err(Error::arg(format!(
            "rank {r} outside 1..={}",
            in_features.min(out_features)
        )));
    }
    let (w1, w2) = w.svd()?.truncate(r)?;
    let project = Layer::with_params(LayerSpec::Dense {
        in_features,
        out_features: r,
        has_bias: false,
        factorized: true,
        tie_group: None,
    }, w1, None)?;
    let expand = Layer::with_params(
        LayerSpec::Dense {
            in_features: r,
            out_features,
            has_bias,
            factorized: true,
            tie_group: None,
        },
        w2,
        layer.bias.clone(),
    )?;
    Ok((project, expand))
}

/// Replace one conv layer by a rank-`r` conv (original geometry, no bias)
/// followed by a 1x1 conv carrying the original bias.
pub fn compress_conv(layer: &Layer, r: usize) -> Result<(Layer, Layer)> {
    let LayerSpec::Conv2d {
        in_channels,
        out_channels,
        kernel,
        stride,
        pad,
        has_bias,
        ..
    } = layer.spec
    else {
        return Err(Error::arg("compress_conv needs a conv layer"));
    };
    let w = layer.weight.as_ref().expect("conv weight");
    let k = in_channels * kernel[0] * kernel[1];
    if r == 0 || r > out_channels.min(k) {
        return Err(Error::arg(format!(
            "rank {r} outside 1..={}",
            out_channels.min(k)
        )));
    }
    let flat = flatten_for_reg(w)?;
    let (w1, w2) = flat.svd()?.truncate(r)?;
    let project = Layer::with_params(
        LayerSpec::Conv2d {
            in_channels,
            out_channels: r,
            kernel,
            stride,
            pad,
            has_bias: false,
            factorized: true,
        },
        w1.reshape([r, in_channels, kernel[0], kernel[1]])?,
        None,
    )?;
    let expand = Layer::with_params(
        LayerSpec::Conv2d {
            in_channels: r,
            out_channels,
            kernel: [1, 1],
            stride: 1,
            pad: 0,
            has_bias,
            factorized: true,
        },
        w2.reshape([out_channels, r, 1, 1])?,
        layer.bias.clone(),
    )?;
    Ok((project, expand))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompressOptions {
    /// Keep a layer unchanged when factorizing it would grow the parameter
    /// count. Off by default; negative compression is part of the report.
    pub skip_when_larger: bool,
}

/// One compressed unit: a single layer, or a jointly factored group.
#[derive(Debug, Clone)]
pub struct LayerPlan {
    /// Index in the original layer list (first member for joint groups).
    pub layer_index: usize,
    pub target_sparsity: f64,
    /// Resolved truncation rank; `None` when the layer was kept unchanged.
    pub rank: Option<usize>,
    pub params_before: usize,
    pub params_after: usize,
    /// `1 - after/before`; negative when factorization grew the layer.
    pub achieved_sparsity: f64,
    /// Frobenius norm of `W - W2*W1` over the flattened weight.
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone)]
pub struct CompressionPlan {
    pub entries: Vec<LayerPlan>,
    pub params_before: usize,
    pub params_after: usize,
    pub achieved_sparsity: f64,
}

/// Plan plus measured quality; metrics are filled by callers that have data.
#[derive(Debug, Clone)]
pub struct CompressionReport {
    pub plan: CompressionPlan,
    pub metric_before: Option<f64>,
    pub metric_after: Option<f64>,
    pub wall: Duration,
}

fn plan_entry(
    layer_index: usize,
    target: f64,
    rank: Option<usize>,
    params_before: usize,
    params_after: usize,
    reconstruction_error: f64,
) -> LayerPlan {
    LayerPlan {
        layer_index,
        target_sparsity: target,
        rank,
        params_before,
        params_after,
        achieved_sparsity: 1.0 - params_after as f64 / params_before as f64,
        reconstruction_error,
    }
}

fn layer_params(layer: &Layer) -> usize {
    layer.weight.as_ref().map_or(0, Tensor::numel)
        + layer.bias.as_ref().map_or(0, Tensor::numel)
}

fn ensure_not_factorized(model: &Model) -> Result<()> {
    if model.layers.iter().any(|l| l.spec.factorized()) {
        return Err(Error::arg(
            "model already contains factorized layers; compressing twice is rejected",
        ));
    }
    Ok(())
}

/// Factor every dense and conv layer at a uniform target sparsity.
pub fn compress_model(
    model: &Model,
    target_sparsity: f64,
    options: CompressOptions,
) -> Result<(Model, CompressionReport)> {
    check_sparsity(target_sparsity)?;
    ensure_not_factorized(model)?;
    let start = std::time::Instant::now();
    let params_before = model.param_count();
    let mut layers = Vec::with_capacity(model.layers.len() + model.layer_count());
    let mut entries = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        if !layer.spec.is_parameterized() {
            layers.push(layer.clone());
            continue;
        }
        let before = layer_params(layer);
        let (r, pair) = match layer.spec {
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => {
                let r = rank_for_sparsity_dense(in_features, out_features, target_sparsity)?;
                (r, compress_dense(layer, r)?)
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let r = rank_for_sparsity_conv(
                    in_channels,
                    out_channels,
                    kernel[0],
                    kernel[1],
                    target_sparsity,
                )?;
                (r, compress_conv(layer, r)?)
            }
            _ => unreachable!(),
        };
        let after = layer_params(&pair.0) + layer_params(&pair.1);
        if options.skip_when_larger && after > before {
            layers.push(layer.clone());
            entries.push(plan_entry(i, target_sparsity, None, before, before, 0.0));
            continue;
        }
        let recon = reconstruction_error(layer, &pair)?;
        entries.push(plan_entry(i, target_sparsity, Some(r), before, after, recon));
        layers.push(pair.0);
        layers.push(pair.1);
    }
    let compressed = Model {
        input_shape: model.input_shape.clone(),
        layers,
    };
    let params_after = compressed.param_count();
    let plan = CompressionPlan {
        entries,
        params_before,
        params_after,
        achieved_sparsity: 1.0 - params_after as f64 / params_before as f64,
    };
    Ok((
        compressed,
        CompressionReport {
            plan,
            metric_before: None,
            metric_after: None,
            wall: start.elapsed(),
        },
    ))
}

fn reconstruction_error(original: &Layer, pair: &(Layer, Layer)) -> Result<f64> {
    let flat = flatten_for_reg(original.weight.as_ref().expect("weight"))?;
    let w1 = flatten_for_reg(pair.0.weight.as_ref().expect("weight"))?;
    let w2 = flatten_for_reg(pair.1.weight.as_ref().expect("weight"))?;
    Ok(flat.sub(&w2.matmul(&w1)?)?.frobenius_norm())
}

/// Jointly factor several dense layers with a common input width `n`:
/// their weights stack vertically into one `(sum n_o) x n` matrix, one SVD
/// yields a shared projection `diag(sigma_r) v_r^T` (inserted before each
/// member, tied so it is counted once) and a per-layer expansion slice of
/// `u_r` carrying the original bias.
pub fn compress_joint_stacked(
    model: &Model,
    layer_indices: &[usize],
    r: usize,
) -> Result<Model> {
    if layer_indices.is_empty() {
        return Err(Error::arg("no layers to stack"));
    }
    let mut sorted = layer_indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != layer_indices.len() {
        return Err(Error::arg("duplicate layer indices"));
    }

    let mut n_in = None;
    let mut total_out = 0usize;
    for &i in &sorted {
        let layer = model
            .layers
            .get(i)
            .ok_or_else(|| Error::arg(format!("no layer {i}")))?;
        match layer.spec {
            LayerSpec::Dense {
                in_features,
                out_features,
                factorized: false,
                ..
            } => {
                if *n_in.get_or_insert(in_features) != in_features {
                    return Err(Error::arg(format!(
                        "layer {i} input width {in_features} mismatches the stack"
                    )));
                }
                total_out += out_features;
            }
            _ => {
                return Err(Error::arg(format!(
                    "layer {i} is not an unfactorized dense layer"
                )))
            }
        }
    }
    let n = n_in.expect("non-empty");
    if r == 0 || r > total_out.min(n) {
        return Err(Error::arg(format!(
            "rank {r} outside 1..={}",
            total_out.min(n)
        )));
    }

    // Stack weights in index order and factor once.
    let mut stacked = Vec::with_capacity(total_out * n);
    for &i in &sorted {
        stacked.extend_from_slice(model.layers[i].weight.as_ref().expect("weight").data());
    }
    let stacked = Tensor::new([total_out, n], stacked)?;
    let (w1, w2) = stacked.svd()?.truncate(r)?;

    let tie_group = next_tie_group(model);
    let mut layers = Vec::with_capacity(model.layers.len() + sorted.len());
    let mut row_offset = 0usize;
    for (i, layer) in model.layers.iter().enumerate() {
        if !sorted.contains(&i) {
            layers.push(layer.clone());
            continue;
        }
        let LayerSpec::Dense {
            out_features,
            has_bias,
            ..
        } = layer.spec
        else {
            unreachable!()
        };
        let project = Layer::with_params(
            LayerSpec::Dense {
                in_features: n,
                out_features: r,
                has_bias: false,
                factorized: true,
                tie_group: Some(tie_group),
            },
            w1.clone(),
            None,
        )?;
        let mut slice = Vec::with_capacity(out_features * r);
        for row in row_offset..row_offset + out_features {
            slice.extend_from_slice(w2.row(row));
        }
        row_offset += out_features;
        let expand = Layer::with_params(
            LayerSpec::Dense {
                in_features: r,
                out_features,
                has_bias,
                factorized: true,
                tie_group: None,
            },
            Tensor::new([out_features, r], slice)?,
            layer.bias.clone(),
        )?;
        layers.push(project);
        layers.push(expand);
    }
    Ok(Model {
        input_shape: model.input_shape.clone(),
        layers,
    })
}

fn next_tie_group(model: &Model) -> u32 {
    model
        .layers
        .iter()
        .filter_map(|l| match l.spec {
            LayerSpec::Dense { tie_group, .. } => tie_group,
            _ => None,
        })
        .max()
        .map_or(0, |g| g + 1)
}

/// Dense layers eligible for joint compression: square weights sharing one
/// input width (the hidden block of a coordinate network).
pub fn joint_stack_candidates(model: &Model) -> Vec<usize> {
    let mut widths: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        if let LayerSpec::Dense {
            in_features,
            out_features,
            factorized: false,
            ..
        } = layer.spec
        {
            if in_features == out_features {
                match widths.iter_mut().find(|(w, _)| *w == in_features) {
                    Some((_, v)) => v.push(i),
                    None => widths.push((in_features, vec![i])),
                }
            }
        }
    }
    // Largest group wins; ties pick the widest layers.
    widths
        .into_iter()
        .max_by_key(|(w, v)| (v.len(), *w))
        .map(|(_, v)| v)
        .unwrap_or_default()
}

/// Joint variant of [`compress_model`]: the stacked group is factored at the
/// rank solving the dense sparsity equation for the whole stack; other
/// layers are left unchanged.
pub fn compress_model_joint(
    model: &Model,
    target_sparsity: f64,
) -> Result<(Model, CompressionReport)> {
    check_sparsity(target_sparsity)?;
    ensure_not_factorized(model)?;
    let start = std::time::Instant::now();
    let group = joint_stack_candidates(model);
    if group.is_empty() {
        return Err(Error::arg(
            "no square dense layers with a shared input width to stack",
        ));
    }
    let n = match model.layers[group[0]].spec {
        LayerSpec::Dense { in_features, .. } => in_features,
        _ => unreachable!(),
    };
    let total_out: usize = group
        .iter()
        .map(|&i| model.layers[i].spec.out_features().expect("dense"))
        .sum();
    // The stack behaves like one dense layer of shape (sum n_o) x n.
    let r = rank_for_sparsity_dense(n, total_out, target_sparsity)?;
    let before_group: usize = group.iter().map(|&i| layer_params(&model.layers[i])).sum();
    let params_before = model.param_count();
    let compressed = compress_joint_stacked(model, &group, r)?;
    let params_after = compressed.param_count();
    let after_group = before_group - (params_before - params_after);

    // Reconstruction error of the stacked matrix.
    let mut stacked = Vec::new();
    for &i in &group {
        stacked.extend_from_slice(model.layers[i].weight.as_ref().expect("weight").data());
    }
    let stacked = Tensor::new([total_out, n], stacked)?;
    let f = stacked.svd()?;
    let tail: f64 = f.sigma()[r..].iter().map(|s| s * s).sum();

    let plan = CompressionPlan {
        entries: vec![plan_entry(
            group[0],
            target_sparsity,
            Some(r),
            before_group,
            after_group,
            tail.sqrt(),
        )],
        params_before,
        params_after,
        achieved_sparsity: 1.0 - params_after as f64 / params_before as f64,
    };
    Ok((
        compressed,
        CompressionReport {
            plan,
            metric_before: None,
            metric_after: None,
            wall: start.elapsed(),
        },
    ))
}
