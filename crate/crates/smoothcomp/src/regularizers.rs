//! Weight-smoothness penalties over a model's parameterized layers.
//!
//! All three penalties act on the flattened weight of each dense and conv
//! layer: rows index the output dimension, so a conv weight
//! `(n_o, n_i, h, w)` becomes `n_o x (n_i*h*w)` with row `j` the flattened
//! kernel of output channel `j`. Each layer's term is normalized by its own
//! row count (or singular-value count) and the terms are averaged over the
//! `N` parameterized layers. Biases are never regularized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::Tensor;

/// Which penalty to apply during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    #[default]
    None,
    /// First-order row-difference penalty: discourages jumps between
    /// neighboring output channels.
    R1,
    /// Second-order row-difference penalty: discourages curvature but keeps
    /// linear ramps free.
    R2,
    /// Mean singular value (scaled nuclear norm): favors low-rank weights.
    Nuc,
}

/// Penalty value with per-layer weight gradients, aligned to `model.layers`.
#[derive(Debug, Clone)]
pub struct RegEval {
    pub value: f64,
    pub weight_grads: Vec<Option<Tensor>>,
}

/// Reshape a dense or conv weight to the 2-D row-per-output-channel form.
pub fn flatten_for_reg(w: &Tensor) -> Result<Tensor> {
    match w.rank() {
        2 => Ok(w.clone()),
        4 => {
            let s = w.shape();
            w.reshape([s[0], s[1] * s[2] * s[3]])
        }
        r => Err(Error::arg(format!(
            "flatten_for_reg expects a 2-D or 4-D weight, got rank {r}"
        ))),
    }
}

/// Dispatch on the configured kind. `None` evaluates to zero.
pub fn penalty(model: &Model, kind: RegularizerKind) -> Result<RegEval> {
    match kind {
        RegularizerKind::None => Ok(RegEval {
            value: 0.0,
            weight_grads: model.layers.iter().map(|_| None).collect(),
        }),
        RegularizerKind::R1 => r1_penalty(model),
        RegularizerKind::R2 => r2_penalty(model),
        RegularizerKind::Nuc => nuc_penalty(model),
    }
}

/// Penalty value only, without gradients.
pub fn penalty_value(model: &Model, kind: RegularizerKind) -> Result<f64> {
    Ok(penalty(model, kind)?.value)
}

/// First-order term: mean L1 norm of differences between consecutive rows.
/// Layers with fewer than two rows contribute zero.
pub fn r1_penalty(model: &Model) -> Result<RegEval> {
    row_difference_penalty(model, 1)
}

/// Second-order term: mean L1 norm of second differences of rows. Layers
/// with fewer than three rows contribute zero.
pub fn r2_penalty(model: &Model) -> Result<RegEval> {
    row_difference_penalty(model, 2)
}

/// Shared implementation for the first- and second-order terms.
///
/// The subgradient convention at exact ties is `sign(0) = 0`.
fn row_difference_penalty(model: &Model, order: usize) -> Result<RegEval> {
    let n_layers = model.layer_count();
    let mut value = 0.0;
    let mut grads: Vec<Option<Tensor>> = model.layers.iter().map(|_| None).collect();
    if n_layers == 0 {
        return Ok(RegEval {
            value,
            weight_grads: grads,
        });
    }
    let inv_n = 1.0 / n_layers as f64;
    for (li, layer) in model.layers.iter().enumerate() {
        let Some(w) = &layer.weight else { continue };
        let flat = flatten_for_reg(w)?;
        let (rows, cols) = (flat.rows(), flat.cols());
        if rows <= order {
            log::warn!(
                "layer {li} has {rows} output rows; R{order} needs more than {order} and the layer contributes 0"
            );
            grads[li] = Some(Tensor::zeros(w.shape().to_vec()));
            continue;
        }
        let scale = inv_n / (rows - order) as f64;
        let mut flat_grad = Tensor::zeros([rows, cols]);
        for j in 0..rows - order {
            for col in 0..cols {
                if order == 1 {
                    let d = flat.get2(j, col) - flat.get2(j + 1, col);
                    value += scale * d.abs();
                    let s = sign0(d) * scale;
                    if s != 0.0 {
                        *flat_grad.data_mut().get_mut(j * cols + col).unwrap() += s;
                        *flat_grad.data_mut().get_mut((j + 1) * cols + col).unwrap() -= s;
                    }
                } else {
                    let d = flat.get2(j, col) - 2.0 * flat.get2(j + 1, col)
                        + flat.get2(j + 2, col);
                    value += scale * d.abs();
                    let s = sign0(d) * scale;
                    if s != 0.0 {
                        *flat_grad.data_mut().get_mut(j * cols + col).unwrap() += s;
                        *flat_grad.data_mut().get_mut((j + 1) * cols + col).unwrap() -= 2.0 * s;
                        *flat_grad.data_mut().get_mut((j + 2) * cols + col).unwrap() += s;
                    }
                }
            }
        }
        grads[li] = Some(flat_grad.reshape(w.shape().to_vec())?);
    }
    Ok(RegEval {
        value,
        weight_grads: grads,
    })
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Nuclear term: per layer, the mean singular value of the flattened weight;
/// averaged over layers. The gradient of each layer term is
/// `u * v^T / (N * m)`, a valid subgradient everywhere.
pub fn nuc_penalty(model: &Model) -> Result<RegEval> {
    let n_layers = model.layer_count();
    let mut value = 0.0;
    let mut grads: Vec<Option<Tensor>> = model.layers.iter().map(|_| None).collect();
    if n_layers == 0 {
        return Ok(RegEval {
            value,
            weight_grads: grads,
        });
    }
    let inv_n = 1.0 / n_layers as f64;
    for (li, layer) in model.layers.iter().enumerate() {
        let Some(w) = &layer.weight else { continue };
        let flat = flatten_for_reg(w)?;
        let f = flat.svd()?;
        let m = f.k() as f64;
        let scale = inv_n / m;
        value += scale * f.sigma().iter().sum::<f64>();
        let g = f.u().matmul(&f.v().transpose())?.scale(scale);
        grads[li] = Some(g.reshape(w.shape().to_vec())?);
    }
    Ok(RegEval {
        value,
        weight_grads: grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, LayerSpec, Model};

    /// Model with a single dense layer holding the given weight.
    fn single_dense(w: Tensor) -> Model {
        let (out_f, in_f) = (w.rows(), w.cols());
        let spec = LayerSpec::dense(in_f, out_f, false);
        Model {
            input_shape: vec![in_f],
            layers: vec![Layer::with_params(spec, w, None).unwrap()],
        }
    }

    fn lcg_tensor(shape: &[usize], seed: &mut u64) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn flatten_passthrough_and_conv() {
        let w2 = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(flatten_for_reg(&w2).unwrap(), w2);
        let w4 = Tensor::new([2, 1, 1, 1], vec![5.0, 7.0]).unwrap();
        let flat = flatten_for_reg(&w4).unwrap();
        assert_eq!(flat.shape(), &[2, 1]);
        assert_eq!(flat.data(), &[5.0, 7.0]);
        assert!(flatten_for_reg(&Tensor::zeros([3])).is_err());
    }

    #[test]
    fn flatten_round_trips_conv_weights() {
        let mut s = 5;
        let w = lcg_tensor(&[3, 2, 3, 3], &mut s);
        let flat = flatten_for_reg(&w).unwrap();
        let back = flat.reshape([3, 2, 3, 3]).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn r1_hand_case() {
        // Rows (0), (1), (3): (|0-1| + |1-3|) / (1 * 2) = 1.5
        let m = single_dense(Tensor::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]));
        let eval = r1_penalty(&m).unwrap();
        assert!((eval.value - 1.5).abs() < 1e-15);
    }

    #[test]
    fn r1_zero_on_identical_rows() {
        let m = single_dense(Tensor::from_rows(&vec![vec![2.0, -1.0]; 4]));
        assert_eq!(r1_penalty(&m).unwrap().value, 0.0);
    }

    #[test]
    fn r2_hand_case() {
        // Rows (0), (1), (4): |0 - 2 + 4| / (1 * 1) = 2.0
        let m = single_dense(Tensor::from_rows(&[vec![0.0], vec![1.0], vec![4.0]]));
        let eval = r2_penalty(&m).unwrap();
        assert!((eval.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn r2_zero_on_linear_ramp() {
        let rows: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64 * 0.5 - 1.0, j as f64]).collect();
        let m = single_dense(Tensor::from_rows(&rows));
        assert_eq!(r2_penalty(&m).unwrap().value, 0.0);
    }

    #[test]
    fn nuc_hand_cases() {
        let m = single_dense(Tensor::eye(3));
        assert!((nuc_penalty(&m).unwrap().value - 1.0).abs() < 1e-12);
        let m = single_dense(Tensor::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]));
        assert!((nuc_penalty(&m).unwrap().value - 3.5).abs() < 1e-12);
    }

    #[test]
    fn small_layers_contribute_zero() {
        let m = single_dense(Tensor::from_rows(&[vec![1.0, 2.0]]));
        assert_eq!(r1_penalty(&m).unwrap().value, 0.0);
        let m = single_dense(Tensor::from_rows(&[vec![1.0], vec![5.0]]));
        assert_eq!(r2_penalty(&m).unwrap().value, 0.0);
    }

    #[test]
    fn degree_one_homogeneity() {
        let mut s = 41;
        let w = lcg_tensor(&[4, 5], &mut s);
        for c in [-2.5f64, 0.5, 3.0] {
            let base = single_dense(w.clone());
            let scaled = single_dense(w.scale(c));
            for kind in [RegularizerKind::R1, RegularizerKind::R2, RegularizerKind::Nuc] {
                let a = penalty_value(&base, kind).unwrap();
                let b = penalty_value(&scaled, kind).unwrap();
                assert!(
                    (b - c.abs() * a).abs() < 1e-12,
                    "{kind:?} not 1-homogeneous: {b} vs {}",
                    c.abs() * a
                );
            }
        }
    }

    #[test]
    fn row_permutation_sensitivity() {
        let mut s = 43;
        let w = lcg_tensor(&[5, 4], &mut s);
        // Swap first and last rows.
        let mut rows: Vec<Vec<f64>> = (0..5).map(|i| w.row(i).to_vec()).collect();
        rows.swap(0, 4);
        let shuffled = Tensor::from_rows(&rows);
        let base = single_dense(w);
        let perm = single_dense(shuffled);
        // R1/R2 change; nuclear norm is invariant.
        let r1a = penalty_value(&base, RegularizerKind::R1).unwrap();
        let r1b = penalty_value(&perm, RegularizerKind::R1).unwrap();
        assert!((r1a - r1b).abs() > 1e-6);
        let r2a = penalty_value(&base, RegularizerKind::R2).unwrap();
        let r2b = penalty_value(&perm, RegularizerKind::R2).unwrap();
        assert!((r2a - r2b).abs() > 1e-6);
        let na = penalty_value(&base, RegularizerKind::Nuc).unwrap();
        let nb = penalty_value(&perm, RegularizerKind::Nuc).unwrap();
        assert!((na - nb).abs() < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Away from ties (random entries), sign subgradients are exact.
        let mut s = 47;
        let w = lcg_tensor(&[5, 4], &mut s);
        for kind in [RegularizerKind::R1, RegularizerKind::R2, RegularizerKind::Nuc] {
            let mut model = single_dense(w.clone());
            let eval = penalty(&model, kind).unwrap();
            let g = eval.weight_grads[0].clone().unwrap();
            let step = 1e-5;
            let tol = if kind == RegularizerKind::Nuc { 1e-3 } else { 1e-4 };
            for e in 0..w.numel() {
                let orig = model.layers[0].weight.as_ref().unwrap().data()[e];
                model.layers[0].weight.as_mut().unwrap().data_mut()[e] = orig + step;
                let up = penalty_value(&model, kind).unwrap();
                model.layers[0].weight.as_mut().unwrap().data_mut()[e] = orig - step;
                let down = penalty_value(&model, kind).unwrap();
                model.layers[0].weight.as_mut().unwrap().data_mut()[e] = orig;
                let fd = (up - down) / (2.0 * step);
                let an = g.data()[e];
                let rel = (an - fd).abs() / (an.abs() + fd.abs()).max(1e-6);
                assert!(rel < tol, "{kind:?} entry {e}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn conv_weights_are_flattened_per_output_channel() {
        // A 2-channel 1x1-kernel conv equals the dense case row-wise.
        let w = Tensor::new([3, 2, 1, 1], vec![0.0, 0.0, 1.0, 1.0, 3.0, 3.0]).unwrap();
        let spec = LayerSpec::conv2d(2, 3, [1, 1], 1, 0, false);
        let model = Model {
            input_shape: vec![2, 2, 2],
            layers: vec![Layer::with_params(spec, w, None).unwrap()],
        };
        // Rows (0,0), (1,1), (3,3): R1 = (2 + 4) / (1 * 2) = 3.0
        assert!((r1_penalty(&model).unwrap().value - 3.0).abs() < 1e-15);
    }
}
