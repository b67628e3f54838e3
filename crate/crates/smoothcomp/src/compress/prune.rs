//! Structured and unstructured L1 pruning baselines.

use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, Model};
use crate::regularizers::flatten_for_reg;
use crate::tensor::Tensor;

/// Remove the lowest-L1-norm output channels of each parameterized layer
/// (ties removed lowest index first) and the matching input slices of the
/// consumer layer, keeping shapes composed.
///
/// A layer keeps `max(1, ceil((1 - sparsity) * n_o))` channels. The terminal
/// parameterized layer's outputs are the task surface (class logits, pixel
/// channels) and are not pruned. Layers are processed front to back, so a
/// layer's channel norms are taken after upstream slices were removed.
pub fn prune_structured_l1(model: &Model, sparsity: f64) -> Result<Model> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::arg(format!("sparsity {sparsity} outside [0, 1]")));
    }
    if model.layers.iter().any(|l| {
        matches!(
            l.spec,
            LayerSpec::Dense {
                tie_group: Some(_),
                ..
            }
        )
    }) {
        return Err(Error::arg(
            "structured pruning does not support tied (jointly factored) layers",
        ));
    }
    let param_indices = model.param_layer_indices();
    let last_param = *param_indices.last().ok_or_else(|| {
        Error::arg("model has no parameterized layers")
    })?;
    let shapes = model.layer_input_shapes();

    let mut layers: Vec<Layer> = Vec::with_capacity(model.layers.len());
    // Output channels removed from the most recent pruned layer, waiting to
    // be removed from the next parameterized layer's input. `block` is the
    // number of flattened features per channel at the consumer (h*w after a
    // conv feeding a flatten, 1 otherwise).
    let mut pending: Option<(Vec<usize>, usize)> = None;

    for (i, layer) in model.layers.iter().enumerate() {
        if !layer.spec.is_parameterized() {
            layers.push(layer.clone());
            continue;
        }
        let mut current = layer.clone();
        if let Some((removed, block)) = pending.take() {
            current = drop_input_slices(&current, &removed, block)?;
        }
        if i != last_param && sparsity > 0.0 {
            let n_o = current.spec.out_features().expect("parameterized");
            let kept = (((1.0 - sparsity) * n_o as f64) - 1e-9).ceil().max(1.0) as usize;
            if kept < n_o {
                let removed = lowest_norm_channels(&current, n_o - kept)?;
                current = drop_output_channels(&current, &removed)?;
                let block = consumer_block_size(model, &shapes, i)?;
                pending = Some((removed, block));
            }
        }
        layers.push(current);
    }
    Ok(Model {
        input_shape: model.input_shape.clone(),
        layers,
    })
}

/// Indices of the `count` lowest-L1-norm output rows of the flattened
/// weight, lowest index first among ties. Returned sorted ascending.
pub fn lowest_norm_channels(layer: &Layer, count: usize) -> Result<Vec<usize>> {
    let flat = flatten_for_reg(layer.weight.as_ref().expect("weight"))?;
    let mut order: Vec<usize> = (0..flat.rows()).collect();
    let norms: Vec<f64> = (0..flat.rows())
        .map(|r| flat.row(r).iter().map(|v| v.abs()).sum())
        .collect();
    order.sort_by(|&a, &b| {
        norms[a]
            .partial_cmp(&norms[b])
            .expect("finite norms")
            .then(a.cmp(&b))
    });
    let mut removed: Vec<usize> = order.into_iter().take(count).collect();
    removed.sort_unstable();
    Ok(removed)
}

fn drop_output_channels(layer: &Layer, removed: &[usize]) -> Result<Layer> {
    let w = layer.weight.as_ref().expect("weight");
    let n_o = w.shape()[0];
    let row_len: usize = w.shape()[1..].iter().product();
    let mut data = Vec::with_capacity((n_o - removed.len()) * row_len);
    let mut bias = Vec::new();
    for o in 0..n_o {
        if removed.binary_search(&o).is_ok() {
            continue;
        }
        data.extend_from_slice(&w.data()[o * row_len..(o + 1) * row_len]);
        if let Some(b) = &layer.bias {
            bias.push(b.data()[o]);
        }
    }
    let kept = n_o - removed.len();
    let mut shape = w.shape().to_vec();
    shape[0] = kept;
    let spec = match layer.spec.clone() {
        LayerSpec::Dense {
            in_features,
            has_bias,
            factorized,
            tie_group,
            ..
        } => LayerSpec::Dense {
            in_features,
            out_features: kept,
            has_bias,
            factorized,
            tie_group,
        },
        LayerSpec::Conv2d {
            in_channels,
            kernel,
            stride,
            pad,
            has_bias,
            factorized,
            ..
        } => LayerSpec::Conv2d {
            in_channels,
            out_channels: kept,
            kernel,
            stride,
            pad,
            has_bias,
            factorized,
        },
        _ => unreachable!(),
    };
    Layer::with_params(
        spec,
        Tensor::new(shape, data)?,
        layer.bias.as_ref().map(|_| Tensor::new([kept], bias)).transpose()?,
    )
}

/// Remove the input features/channels of `layer` that correspond to the
/// removed upstream channels. `block` expands each channel index into that
/// many consecutive flattened features.
fn drop_input_slices(layer: &Layer, removed: &[usize], block: usize) -> Result<Layer> {
    let w = layer.weight.as_ref().expect("weight");
    match layer.spec.clone() {
        LayerSpec::Dense {
            in_features,
            out_features,
            has_bias,
            factorized,
            tie_group,
        } => {
            let dropped: Vec<usize> = removed
                .iter()
                .flat_map(|&c| c * block..(c + 1) * block)
                .collect();
            let kept_in = in_features - dropped.len();
            let mut data = Vec::with_capacity(out_features * kept_in);
            for o in 0..out_features {
                for c in 0..in_features {
                    if dropped.binary_search(&c).is_err() {
                        data.push(w.get2(o, c));
                    }
                }
            }
            Layer::with_params(
                LayerSpec::Dense {
                    in_features: kept_in,
                    out_features,
                    has_bias,
                    factorized,
                    tie_group,
                },
                Tensor::new([out_features, kept_in], data)?,
                layer.bias.clone(),
            )
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            has_bias,
            factorized,
        } => {
            debug_assert_eq!(block, 1, "conv consumers use channel indices directly");
            let kept_in = in_channels - removed.len();
            let plane = kernel[0] * kernel[1];
            let mut data = Vec::with_capacity(out_channels * kept_in * plane);
            for o in 0..out_channels {
                for c in 0..in_channels {
                    if removed.binary_search(&c).is_err() {
                        let start = (o * in_channels + c) * plane;
                        data.extend_from_slice(&w.data()[start..start + plane]);
                    }
                }
            }
            Layer::with_params(
                LayerSpec::Conv2d {
                    in_channels: kept_in,
                    out_channels,
                    kernel,
                    stride,
                    pad,
                    has_bias,
                    factorized,
                },
                Tensor::new([out_channels, kept_in, kernel[0], kernel[1]], data)?,
                layer.bias.clone(),
            )
        }
        _ => Err(Error::arg(
            "input slices can only be removed from dense or conv layers",
        )),
    }
}

/// Flattened features per removed channel at the consumer of layer `i`.
fn consumer_block_size(model: &Model, shapes: &[Vec<usize>], i: usize) -> Result<usize> {
    let mut j = i + 1;
    while j < model.layers.len() {
        match &model.layers[j].spec {
            LayerSpec::Conv2d { .. } => return Ok(1),
            LayerSpec::Dense { .. } => {
                // Walk back to the flatten boundary, if any, for the spatial
                // block size; a dense directly after dense is block 1.
                for k in (i + 1..j).rev() {
                    if matches!(model.layers[k].spec, LayerSpec::Flatten) {
                        let s = &shapes[k];
                        return Ok(s[1..].iter().product());
                    }
                }
                return Ok(1);
            }
            _ => j += 1,
        }
    }
    // No consumer: the terminal layer, which is never pruned.
    Ok(1)
}

/// Zero the smallest-magnitude fraction `p` of all weight entries, globally
/// ranked; ties at the threshold zero the lower flat parameter index first.
/// Biases are exempt and tensor shapes are unchanged.
pub fn prune_unstructured_l1(model: &Model, p: f64) -> Result<Model> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("fraction {p} outside [0, 1]")));
    }
    if model.layers.iter().any(|l| {
        matches!(
            l.spec,
            LayerSpec::Dense {
                tie_group: Some(_),
                ..
            }
        )
    }) {
        return Err(Error::arg(
            "unstructured pruning does not support tied (jointly factored) layers",
        ));
    }
    let mut pruned = model.clone();
    let mut entries: Vec<(f64, usize)> = Vec::new();
    let mut offsets = Vec::new();
    let mut offset = 0usize;
    for layer in &pruned.layers {
        offsets.push(offset);
        if let Some(w) = &layer.weight {
            for (e, &v) in w.data().iter().enumerate() {
                entries.push((v.abs(), offset + e));
            }
            offset += w.numel();
        }
    }
    let zero_count = (p * entries.len() as f64).round() as usize;
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite weights").then(a.1.cmp(&b.1)));
    let mut to_zero: Vec<usize> = entries[..zero_count].iter().map(|&(_, i)| i).collect();
    to_zero.sort_unstable();

    let mut li = 0usize;
    for (layer_idx, layer) in pruned.layers.iter_mut().enumerate() {
        let Some(w) = &mut layer.weight else { continue };
        let start = offsets[layer_idx];
        let end = start + w.numel();
        while li < to_zero.len() && to_zero[li] < end {
            w.data_mut()[to_zero[li] - start] = 0.0;
            li += 1;
        }
    }
    Ok(pruned)
}
