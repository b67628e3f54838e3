//! Reverse-mode gradients for the sequential model.
//!
//! The backward pass walks the layer list in reverse, turning the gradient of
//! the loss with respect to each layer's output into gradients with respect
//! to its parameters and its input. Gradients are exact up to floating point;
//! the unit tests check every rule against central finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ActivationKind, LayerCache, LayerSpec, Model};
use crate::regularizers::{self, RegularizerKind};
use crate::tensor::{col2im, Tensor};

/// Data-term loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

/// Targets for one batch.
#[derive(Debug, Clone)]
pub enum BatchTarget {
    /// Regression targets, same leading batch dimension as the prediction.
    Values(Tensor),
    /// Class indices for cross-entropy.
    Labels(Vec<usize>),
}

/// Per-layer parameter gradients, index-aligned with `model.layers`.
#[derive(Debug, Clone)]
pub struct Grads {
    pub weight: Vec<Option<Tensor>>,
    pub bias: Vec<Option<Tensor>>,
}

impl Grads {
    fn zeros_like(model: &Model) -> Grads {
        Grads {
            weight: model
                .layers
                .iter()
                .map(|l| l.weight.as_ref().map(|w| Tensor::zeros(w.shape().to_vec())))
                .collect(),
            bias: model
                .layers
                .iter()
                .map(|l| l.bias.as_ref().map(|b| Tensor::zeros(b.shape().to_vec())))
                .collect(),
        }
    }
}

/// Loss value split into its terms, with gradients.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub total: f64,
    pub data_loss: f64,
    /// Regularizer value (before scaling by lambda); 0 when unused.
    pub reg_value: f64,
    pub grads: Grads,
}

/// Mean squared error over every batch element and output, with gradient.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let mut grad = Tensor::zeros(pred.shape().to_vec());
    let mut loss = 0.0;
    for (i, (&p, &t)) in pred.data().iter().zip(target.data()).enumerate() {
        let d = p - t;
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Mean over the batch of `-log softmax(logits)[label]`, with gradient.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::shape(format!(
            "cross entropy logits {:?} vs {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    let inv_b = 1.0 / b as f64;
    let mut grad = Tensor::zeros([b, c]);
    let mut loss = 0.0;
    for (bi, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(Error::arg(format!(
                "label {label} out of range for {c} classes"
            )));
        }
        let row = logits.row(bi);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += (lse - row[label]) * inv_b;
        for (j, &z) in row.iter().enumerate() {
            let softmax = (z - lse).exp();
            grad.data_mut()[bi * c + j] =
                (softmax - if j == label { 1.0 } else { 0.0 }) * inv_b;
        }
    }
    Ok((loss, grad))
}

/// Total loss `data + lambda * R` and exact gradients for one batch.
pub fn loss_and_grads(
    model: &Model,
    x: &Tensor,
    target: &BatchTarget,
    loss: Loss,
    regularizer: RegularizerKind,
    lambda: f64,
) -> Result<LossEval> {
    if x.shape()[0] == 0 {
        return Err(Error::arg("empty batch"));
    }
    if lambda < 0.0 {
        return Err(Error::arg("lambda must be non-negative"));
    }
    let (out, caches) = model.forward_with_cache(x)?;
    let (data_loss, dout) = match (loss, target) {
        (Loss::Mse, BatchTarget::Values(t)) => mse_loss(&out, t)?,
        (Loss::CrossEntropy, BatchTarget::Labels(l)) => cross_entropy_loss(&out, l)?,
        _ => {
            return Err(Error::arg(
                "loss kind does not match target kind",
            ))
        }
    };
    if !data_loss.is_finite() {
        return Err(Error::NonFinite("loss value".into()));
    }
    let mut grads = backward(model, &caches, dout)?;

    let mut reg_value = 0.0;
    let mut total = data_loss;
    if regularizer != RegularizerKind::None && lambda > 0.0 {
        let reg = regularizers::penalty(model, regularizer)?;
        reg_value = reg.value;
        total += lambda * reg_value;
        for (slot, rg) in grads.weight.iter_mut().zip(reg.weight_grads) {
            if let (Some(g), Some(rg)) = (slot, rg) {
                g.axpy(lambda, &rg)?;
            }
        }
    }
    Ok(LossEval {
        total,
        data_loss,
        reg_value,
        grads,
    })
}

/// Propagate `dout` back through the cached forward pass.
fn backward(model: &Model, caches: &[LayerCache], dout: Tensor) -> Result<Grads> {
    let mut grads = Grads::zeros_like(model);
    let mut dcur = dout;
    for (i, layer) in model.layers.iter().enumerate().rev() {
        let cache = &caches[i];
        dcur = match (&layer.spec, cache) {
            (LayerSpec::Dense { .. }, LayerCache::Dense { input }) => {
                let w = layer.weight.as_ref().expect("dense weight");
                // dW = dY^T X, db = column sums of dY, dX = dY W.
                grads.weight[i] = Some(dcur.transpose().matmul(input)?);
                if layer.bias.is_some() {
                    let (b, n) = (dcur.shape()[0], dcur.shape()[1]);
                    let mut db = Tensor::zeros([n]);
                    for bi in 0..b {
                        for j in 0..n {
                            db.data_mut()[j] += dcur.data()[bi * n + j];
                        }
                    }
                    grads.bias[i] = Some(db);
                }
                dcur.matmul(w)?
            }
            (
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    pad,
                    ..
                },
                LayerCache::Conv {
                    in_shape,
                    cols,
                    out_hw,
                },
            ) => {
                let weight = layer.weight.as_ref().expect("conv weight");
                let k = in_channels * kernel[0] * kernel[1];
                let wflat = weight.reshape([*out_channels, k])?;
                let positions = out_hw.0 * out_hw.1;
                let batch = dcur.shape()[0];
                let mut dwflat = Tensor::zeros([*out_channels, k]);
                let mut db = Tensor::zeros([*out_channels]);
                let mut dx = Tensor::zeros([batch, in_shape[0], in_shape[1], in_shape[2]]);
                let sample_len = in_shape[0] * in_shape[1] * in_shape[2];
                for (bi, col) in cols.iter().enumerate() {
                    let dy = Tensor::new(
                        [*out_channels, positions],
                        dcur.data()[bi * out_channels * positions
                            ..(bi + 1) * out_channels * positions]
                            .to_vec(),
                    )?;
                    dwflat.axpy(1.0, &dy.matmul(&col.transpose())?)?;
                    if layer.bias.is_some() {
                        for o in 0..*out_channels {
                            db.data_mut()[o] += dy.row(o).iter().sum::<f64>();
                        }
                    }
                    let dcol = wflat.transpose().matmul(&dy)?;
                    let dsample = col2im(
                        &dcol,
                        in_shape[0],
                        in_shape[1],
                        in_shape[2],
                        kernel[0],
                        kernel[1],
                        *stride,
                        *pad,
                    )?;
                    dx.data_mut()[bi * sample_len..(bi + 1) * sample_len]
                        .copy_from_slice(dsample.data());
                }
                grads.weight[i] =
                    Some(dwflat.reshape(weight.shape().to_vec())?);
                if layer.bias.is_some() {
                    grads.bias[i] = Some(db);
                }
                dx
            }
            (LayerSpec::Activation { function }, LayerCache::Activation { pre }) => {
                match function {
                    ActivationKind::Relu => {
                        let mut dx = dcur;
                        for (g, &z) in dx.data_mut().iter_mut().zip(pre.data()) {
                            if z <= 0.0 {
                                *g = 0.0;
                            }
                        }
                        dx
                    }
                    ActivationKind::Sine { omega0 } => {
                        let om = *omega0;
                        let mut dx = dcur;
                        for (g, &z) in dx.data_mut().iter_mut().zip(pre.data()) {
                            *g *= om * (om * z).cos();
                        }
                        dx
                    }
                    ActivationKind::Logits => dcur,
                }
            }
            (LayerSpec::Flatten, LayerCache::Flatten { in_shape }) => {
                dcur.reshape(in_shape.clone())?
            }
            _ => unreachable!("cache kind always matches layer kind"),
        };
    }
    Ok(grads)
}
