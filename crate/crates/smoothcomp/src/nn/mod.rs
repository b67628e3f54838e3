//! Layer specifications, parameter storage, and the forward pass.
//!
//! A [`Model`] is an ordered list of layers evaluated strictly in sequence.
//! Dense and conv2d layers carry parameters; activation and flatten layers do
//! not. Convolutions are evaluated as `weight * im2col(input)`.

mod backprop;
mod optim;
mod train;

pub use backprop::{loss_and_grads, BatchTarget, Grads, Loss, LossEval};
pub use optim::{LrSchedule, Optimizer, OptimizerConfig};
pub use train::{evaluate_metric, train, EpochMetrics, MetricKind, TrainConfig};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv2d_output_dims, im2col, Tensor};

/// Elementwise nonlinearity applied by an activation layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    /// `sin(omega0 * z)`, the coordinate-network activation.
    Sine { omega0: f64 },
    /// Identity passthrough marking raw classifier outputs; the softmax is
    /// folded into the cross-entropy loss.
    Logits,
}

/// Architecture description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        in_features: usize,
        out_features: usize,
        has_bias: bool,
        /// Set on layers produced by SVD compression; guards re-compression.
        #[serde(default, skip_serializing_if = "is_false")]
        factorized: bool,
        /// Layers sharing a tie group hold identical weight tensors that are
        /// counted once in parameter accounting (joint stacked compression).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tie_group: Option<u32>,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        pad: usize,
        has_bias: bool,
        #[serde(default, skip_serializing_if = "is_false")]
        factorized: bool,
    },
    Activation {
        function: ActivationKind,
    },
    Flatten,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl LayerSpec {
    pub fn dense(in_features: usize, out_features: usize, has_bias: bool) -> Self {
        LayerSpec::Dense {
            in_features,
            out_features,
            has_bias,
            factorized: false,
            tie_group: None,
        }
    }

    pub fn conv2d(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        pad: usize,
        has_bias: bool,
    ) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            has_bias,
            factorized: false,
        }
    }

    pub fn activation(function: ActivationKind) -> Self {
        LayerSpec::Activation { function }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Activation { .. } => "activation",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Weight tensor shape, if the layer has one.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match self {
            LayerSpec::Dense {
                in_features,
                out_features,
                ..
            } => Some(vec![*out_features, *in_features]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some(vec![*out_channels, *in_channels, kernel[0], kernel[1]]),
            _ => None,
        }
    }

    pub fn has_bias(&self) -> bool {
        match self {
            LayerSpec::Dense { has_bias, .. } | LayerSpec::Conv2d { has_bias, .. } => *has_bias,
            _ => false,
        }
    }

    /// Output feature/channel count of a parameterized layer.
    pub fn out_features(&self) -> Option<usize> {
        match self {
            LayerSpec::Dense { out_features, .. } => Some(*out_features),
            LayerSpec::Conv2d { out_channels, .. } => Some(*out_channels),
            _ => None,
        }
    }

    pub fn factorized(&self) -> bool {
        match self {
            LayerSpec::Dense { factorized, .. } | LayerSpec::Conv2d { factorized, .. } => {
                *factorized
            }
            _ => false,
        }
    }

    /// Per-sample output shape given the per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            LayerSpec::Dense { in_features, out_features, .. } => {
                if input != [*in_features] {
                    return Err(Error::shape(format!(
                        "dense layer expects [{in_features}], got {input:?}"
                    )));
                }
                Ok(vec![*out_features])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad,
                ..
            } => {
                if input.len() != 3 || input[0] != *in_channels {
                    return Err(Error::shape(format!(
                        "conv2d layer expects [{in_channels}, h, w], got {input:?}"
                    )));
                }
                let (h_out, w_out) =
                    conv2d_output_dims(input[1], input[2], kernel[0], kernel[1], *stride, *pad)?;
                Ok(vec![*out_channels, h_out, w_out])
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Flatten => {
                if input.len() < 2 {
                    return Err(Error::shape(format!(
                        "flatten expects rank >= 2 input, got {input:?}"
                    )));
                }
                Ok(vec![input.iter().product()])
            }
        }
    }
}

/// A layer spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Option<Tensor>,
    pub bias: Option<Tensor>,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Self {
        let weight = spec.weight_shape().map(Tensor::zeros);
        let bias = if spec.has_bias() {
            spec.out_features().map(|n| Tensor::zeros([n]))
        } else {
            None
        };
        Layer { spec, weight, bias }
    }

    pub fn with_params(spec: LayerSpec, weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        if let Some(shape) = spec.weight_shape() {
            if weight.shape() != shape.as_slice() {
                return Err(Error::shape(format!(
                    "weight shape {:?} does not match spec {:?}",
                    weight.shape(),
                    shape
                )));
            }
        }
        match (&bias, spec.has_bias(), spec.out_features()) {
            (Some(b), true, Some(n)) if b.shape() != [n] => {
                return Err(Error::shape(format!(
                    "bias shape {:?}, expected [{n}]",
                    b.shape()
                )));
            }
            (Some(_), false, _) => {
                return Err(Error::arg("bias given for a layer without bias"));
            }
            (None, true, _) => {
                return Err(Error::arg("missing bias for a layer with bias"));
            }
            _ => {}
        }
        Ok(Layer {
            spec,
            weight: Some(weight),
            bias,
        })
    }
}

/// Sequential network: input shape plus ordered layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// Per-sample input shape (no batch dimension).
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Model {
    /// Build a model with zero-valued parameters, validating that
    /// consecutive layer shapes compose.
    pub fn new(input_shape: Vec<usize>, specs: Vec<LayerSpec>) -> Result<Self> {
        let mut shape = input_shape.clone();
        for (i, spec) in specs.iter().enumerate() {
            shape = spec
                .output_shape(&shape)
                .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
        }
        Ok(Model {
            input_shape,
            layers: specs.into_iter().map(Layer::new).collect(),
        })
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = layer.spec.output_shape(&shape).expect("validated at build");
        }
        shape
    }

    /// Per-sample input shape of every layer, plus the final output shape.
    pub fn layer_input_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut shape = self.input_shape.clone();
        shapes.push(shape.clone());
        for layer in &self.layers {
            shape = layer.spec.output_shape(&shape).expect("validated at build");
            shapes.push(shape.clone());
        }
        shapes
    }

    /// Number of parameterized layers (the `N` in the regularizer
    /// normalizations).
    pub fn layer_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.spec.is_parameterized())
            .count()
    }

    /// Indices of parameterized layers.
    pub fn param_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.spec.is_parameterized())
            .map(|(i, _)| i)
            .collect()
    }

    /// Total parameter count; weight tensors in the same tie group are
    /// counted once.
    pub fn param_count(&self) -> usize {
        let mut seen_ties = Vec::new();
        let mut count = 0;
        for layer in &self.layers {
            if let LayerSpec::Dense {
                tie_group: Some(g), ..
            } = layer.spec
            {
                if seen_ties.contains(&g) {
                    // Tied copy: bias (if any) is still its own parameter.
                    count += layer.bias.as_ref().map_or(0, Tensor::numel);
                    continue;
                }
                seen_ties.push(g);
            }
            count += layer.weight.as_ref().map_or(0, Tensor::numel);
            count += layer.bias.as_ref().map_or(0, Tensor::numel);
        }
        count
    }

    /// Seeded uniform initialization.
    ///
    /// Dense and conv weights draw from `±sqrt(1/fan_in)`; a dense layer
    /// feeding a sine activation uses the coordinate-network convention
    /// (`±1/fan_in` for the first parameterized layer, `±sqrt(6/fan_in) /
    /// omega0` for later ones). Biases draw from `±sqrt(1/fan_in)`.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut first_param_layer = true;
        for i in 0..self.layers.len() {
            if !self.layers[i].spec.is_parameterized() {
                continue;
            }
            let next_sine = matches!(
                self.layers.get(i + 1).map(|l| &l.spec),
                Some(LayerSpec::Activation {
                    function: ActivationKind::Sine { .. }
                })
            );
            let (fan_in, bound) = match &self.layers[i].spec {
                LayerSpec::Dense { in_features, .. } => {
                    let fan = *in_features as f64;
                    let bound = if next_sine {
                        let omega0 = match self.layers[i + 1].spec {
                            LayerSpec::Activation {
                                function: ActivationKind::Sine { omega0 },
                            } => omega0,
                            _ => unreachable!(),
                        };
                        if first_param_layer {
                            1.0 / fan
                        } else {
                            (6.0 / fan).sqrt() / omega0
                        }
                    } else {
                        (1.0 / fan).sqrt()
                    };
                    (fan, bound)
                }
                LayerSpec::Conv2d {
                    in_channels,
                    kernel,
                    ..
                } => {
                    let fan = (*in_channels * kernel[0] * kernel[1]) as f64;
                    (fan, (1.0 / fan).sqrt())
                }
                _ => unreachable!(),
            };
            first_param_layer = false;
            if let Some(w) = &mut self.layers[i].weight {
                for v in w.data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
            }
            let bias_bound = (1.0 / fan_in).sqrt();
            if let Some(b) = &mut self.layers[i].bias {
                for v in b.data_mut() {
                    *v = rng.gen_range(-bias_bound..bias_bound);
                }
            }
        }
    }

    /// Evaluate the model on a batch with leading batch dimension.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_with_cache(x)?.0)
    }

    /// Forward pass that retains what the backward pass needs.
    pub(crate) fn forward_with_cache(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        if x.rank() < 2 || x.shape()[1..] != *self.input_shape {
            return Err(Error::shape(format!(
                "input shape {:?} does not match model input {:?} (batch leading)",
                x.shape(),
                self.input_shape
            )));
        }
        let batch = x.shape()[0];
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (next, cache) = layer_forward(layer, &cur, batch).map_err(|e| {
                Error::shape(format!("layer {i} ({}): {e}", layer.spec.kind_name()))
            })?;
            if !next.all_finite() {
                return Err(Error::NonFinite(format!(
                    "layer {i} ({}) produced non-finite values",
                    layer.spec.kind_name()
                )));
            }
            caches.push(cache);
            cur = next;
        }
        Ok((cur, caches))
    }
}

/// Per-layer forward state kept for the backward pass.
pub(crate) enum LayerCache {
    Dense {
        input: Tensor,
    },
    Conv {
        in_shape: [usize; 3],
        cols: Vec<Tensor>,
        out_hw: (usize, usize),
    },
    Activation {
        pre: Tensor,
    },
    Flatten {
        in_shape: Vec<usize>,
    },
}

fn layer_forward(layer: &Layer, x: &Tensor, batch: usize) -> Result<(Tensor, LayerCache)> {
    match &layer.spec {
        LayerSpec::Dense { out_features, .. } => {
            let w = layer.weight.as_ref().expect("dense weight");
            let y = x.matmul(&w.transpose())?;
            let mut y = y;
            if let Some(b) = &layer.bias {
                let n = *out_features;
                for bi in 0..batch {
                    for j in 0..n {
                        y.data_mut()[bi * n + j] += b.data()[j];
                    }
                }
            }
            Ok((y, LayerCache::Dense { input: x.clone() }))
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            ..
        } => {
            let (c, h, w) = (x.shape()[1], x.shape()[2], x.shape()[3]);
            if c != *in_channels {
                return Err(Error::shape(format!(
                    "expected {in_channels} input channels, got {c}"
                )));
            }
            let weight = layer.weight.as_ref().expect("conv weight");
            let k = in_channels * kernel[0] * kernel[1];
            let wflat = weight.reshape([*out_channels, k])?;
            let (h_out, w_out) = conv2d_output_dims(h, w, kernel[0], kernel[1], *stride, *pad)?;
            let positions = h_out * w_out;
            let mut out = Tensor::zeros([batch, *out_channels, h_out, w_out]);
            let mut cols = Vec::with_capacity(batch);
            let sample_len = c * h * w;
            for bi in 0..batch {
                let sample = Tensor::new(
                    [c, h, w],
                    x.data()[bi * sample_len..(bi + 1) * sample_len].to_vec(),
                )?;
                let col = im2col(&sample, kernel[0], kernel[1], *stride, *pad)?;
                let y = wflat.matmul(&col)?;
                let dst =
                    &mut out.data_mut()[bi * out_channels * positions..(bi + 1) * out_channels * positions];
                dst.copy_from_slice(y.data());
                if let Some(b) = &layer.bias {
                    for o in 0..*out_channels {
                        let bias = b.data()[o];
                        for p in 0..positions {
                            dst[o * positions + p] += bias;
                        }
                    }
                }
                cols.push(col);
            }
            Ok((
                out,
                LayerCache::Conv {
                    in_shape: [c, h, w],
                    cols,
                    out_hw: (h_out, w_out),
                },
            ))
        }
        LayerSpec::Activation { function } => {
            let y = match function {
                ActivationKind::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
                ActivationKind::Sine { omega0 } => {
                    let om = *omega0;
                    x.map(|v| (om * v).sin())
                }
                ActivationKind::Logits => x.clone(),
            };
            Ok((y, LayerCache::Activation { pre: x.clone() }))
        }
        LayerSpec::Flatten => {
            let in_shape = x.shape().to_vec();
            let features: usize = in_shape[1..].iter().product();
            let y = x.reshape([batch, features])?;
            Ok((y, LayerCache::Flatten { in_shape }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dense_passthrough() {
        let mut model = Model::new(vec![2], vec![LayerSpec::dense(2, 2, false)]).unwrap();
        model.layers[0].weight = Some(Tensor::eye(2));
        let x = Tensor::new([3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = model.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn dense_hand_case() {
        let mut model = Model::new(vec![2], vec![LayerSpec::dense(2, 1, true)]).unwrap();
        model.layers[0].weight = Some(Tensor::from_rows(&[vec![1.0, 1.0]]));
        model.layers[0].bias = Some(Tensor::new([1], vec![0.5]).unwrap());
        let x = Tensor::new([1, 2], vec![1.0, 2.0]).unwrap();
        let y = model.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.5]);
    }

    #[test]
    fn shapes_must_compose() {
        let err = Model::new(
            vec![3],
            vec![LayerSpec::dense(2, 2, true)],
        );
        assert!(err.is_err());
        let err = Model::new(
            vec![2, 4, 4],
            vec![LayerSpec::conv2d(3, 2, [3, 3], 1, 1, true)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn forward_rejects_wrong_batch_shape() {
        let model = Model::new(vec![4], vec![LayerSpec::dense(4, 2, true)]).unwrap();
        let x = Tensor::zeros([2, 3]);
        assert!(model.forward(&x).is_err());
    }

    #[test]
    fn conv_stack_composes_and_runs() {
        let mut model = Model::new(
            vec![1, 6, 6],
            vec![
                LayerSpec::conv2d(1, 2, [3, 3], 2, 1, true),
                LayerSpec::activation(ActivationKind::Relu),
                LayerSpec::Flatten,
                LayerSpec::dense(2 * 3 * 3, 4, true),
            ],
        )
        .unwrap();
        model.init_params(7);
        assert_eq!(model.output_shape(), vec![4]);
        let x = Tensor::zeros([2, 1, 6, 6]);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4]);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let specs = vec![
            LayerSpec::dense(4, 8, true),
            LayerSpec::activation(ActivationKind::Sine { omega0: 30.0 }),
            LayerSpec::dense(8, 8, true),
        ];
        let mut a = Model::new(vec![4], specs.clone()).unwrap();
        let mut b = Model::new(vec![4], specs.clone()).unwrap();
        let mut c = Model::new(vec![4], specs).unwrap();
        a.init_params(1);
        b.init_params(1);
        c.init_params(2);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sine_init_uses_omega_scaled_bound() {
        let specs = vec![
            LayerSpec::dense(16, 16, false),
            LayerSpec::activation(ActivationKind::Sine { omega0: 30.0 }),
            LayerSpec::dense(16, 16, false),
            LayerSpec::activation(ActivationKind::Sine { omega0: 30.0 }),
        ];
        let mut m = Model::new(vec![16], specs).unwrap();
        m.init_params(3);
        let first_max = m.layers[0].weight.as_ref().unwrap().l1_norm() / 256.0;
        // First layer bound 1/16; hidden bound sqrt(6/16)/30 ~ 0.0204.
        assert!(first_max < 1.0 / 16.0);
        let hidden = m.layers[2].weight.as_ref().unwrap();
        let hidden_bound = (6.0f64 / 16.0).sqrt() / 30.0;
        assert!(hidden.data().iter().all(|v| v.abs() < hidden_bound));
    }

    #[test]
    fn param_count_respects_tie_groups() {
        let mut m = Model::new(
            vec![4],
            vec![LayerSpec::dense(4, 4, true), LayerSpec::dense(4, 4, true)],
        )
        .unwrap();
        assert_eq!(m.param_count(), 2 * (16 + 4));
        for layer in &mut m.layers {
            if let LayerSpec::Dense { tie_group, .. } = &mut layer.spec {
                *tie_group = Some(0);
            }
        }
        assert_eq!(m.param_count(), 16 + 4 + 4);
    }

    #[test]
    fn layer_spec_json_round_trip() {
        let specs = vec![
            LayerSpec::dense(3, 5, true),
            LayerSpec::conv2d(1, 2, [3, 3], 2, 1, true),
            LayerSpec::activation(ActivationKind::Sine { omega0: 30.0 }),
            LayerSpec::activation(ActivationKind::Logits),
            LayerSpec::Flatten,
        ];
        let json = serde_json::to_string(&specs).unwrap();
        let back: Vec<LayerSpec> = serde_json::from_str(&json).unwrap();
        assert_eq!(specs, back);
    }
}
