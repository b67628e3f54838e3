//! SGD and Adam updates plus learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Grads, Model};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
        /// Decoupled weight decay applied at the update step.
        #[serde(default)]
        weight_decay: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn base_lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd { lr, .. } | OptimizerConfig::Adam { lr, .. } => *lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_lr() <= 0.0 {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        match self {
            OptimizerConfig::Sgd {
                momentum,
                weight_decay,
                ..
            } => {
                if !(0.0..1.0).contains(momentum) {
                    return Err(Error::Config("momentum must be in [0, 1)".into()));
                }
                if *weight_decay < 0.0 {
                    return Err(Error::Config("weight decay must be >= 0".into()));
                }
            }
            OptimizerConfig::Adam { beta1, beta2, eps, .. } => {
                if !(0.0..1.0).contains(beta1) || !(0.0..1.0).contains(beta2) {
                    return Err(Error::Config("adam betas must be in [0, 1)".into()));
                }
                if *eps <= 0.0 {
                    return Err(Error::Config("adam eps must be > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Multiplier applied to the base learning rate per epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from 1 at epoch 0 towards 0 at `total` (defaults to the
    /// configured epoch count).
    Cosine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<usize>,
    },
    /// Linear ramp over `warmup` epochs, then the half-cosine.
    WarmupThenCosine {
        warmup: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<usize>,
    },
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { total } => {
                let t = total.unwrap_or(epochs).max(1);
                half_cosine(epoch.min(t), t)
            }
            LrSchedule::WarmupThenCosine { warmup, total } => {
                let t = total.unwrap_or(epochs).max(1);
                if epoch < *warmup {
                    (epoch + 1) as f64 / *warmup as f64
                } else {
                    let rest = (t - warmup).max(1);
                    half_cosine((epoch - warmup).min(rest), rest)
                }
            }
        }
    }
}

fn half_cosine(step: usize, total: usize) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos())
}

/// Per-parameter slot of optimizer state.
enum Slot {
    Sgd { velocity: Tensor },
    Adam { m: Tensor, v: Tensor },
}

/// Mutable optimizer state bound to a model's parameter layout.
pub struct Optimizer {
    cfg: OptimizerConfig,
    /// (layer index, is_weight) in deterministic order.
    params: Vec<(usize, bool)>,
    slots: Vec<Slot>,
    steps: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, model: &Model) -> Optimizer {
        let mut params = Vec::new();
        let mut slots = Vec::new();
        for (i, layer) in model.layers.iter().enumerate() {
            for (tensor, is_weight) in [(&layer.weight, true), (&layer.bias, false)] {
                if let Some(t) = tensor {
                    params.push((i, is_weight));
                    let zero = Tensor::zeros(t.shape().to_vec());
                    slots.push(match cfg {
                        OptimizerConfig::Sgd { .. } => Slot::Sgd {
                            velocity: zero,
                        },
                        OptimizerConfig::Adam { .. } => Slot::Adam {
                            m: zero.clone(),
                            v: zero,
                        },
                    });
                }
            }
        }
        Optimizer {
            cfg,
            params,
            slots,
            steps: 0,
        }
    }

    /// Apply one update at the given absolute learning rate.
    pub fn step(&mut self, model: &mut Model, grads: &Grads, lr: f64) -> Result<()> {
        self.steps += 1;
        for (slot, &(li, is_weight)) in self.slots.iter_mut().zip(&self.params) {
            let grad = if is_weight {
                grads.weight[li].as_ref()
            } else {
                grads.bias[li].as_ref()
            };
            let Some(grad) = grad else {
                return Err(Error::arg(format!(
                    "missing gradient for layer {li} ({})",
                    if is_weight { "weight" } else { "bias" }
                )));
            };
            let param = if is_weight {
                model.layers[li].weight.as_mut()
            } else {
                model.layers[li].bias.as_mut()
            }
            .expect("optimizer bound to this model layout");

            match (&self.cfg, slot) {
                (
                    OptimizerConfig::Sgd {
                        momentum,
                        weight_decay,
                        ..
                    },
                    Slot::Sgd { velocity },
                ) => {
                    for ((v, &g), p) in velocity
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(param.data_mut().iter_mut())
                    {
                        *v = *momentum * *v + g;
                        // Decay decoupled from the gradient path; biases are
                        // decayed like weights only when decay is configured
                        // for them (weight tensors only).
                        let decay = if is_weight { *weight_decay } else { 0.0 };
                        *p -= lr * (*v + decay * *p);
                    }
                }
                (
                    OptimizerConfig::Adam {
                        beta1, beta2, eps, ..
                    },
                    Slot::Adam { m, v },
                ) => {
                    let bc1 = 1.0 - beta1.powi(self.steps as i32);
                    let bc2 = 1.0 - beta2.powi(self.steps as i32);
                    for (((mi, vi), &g), p) in m
                        .data_mut()
                        .iter_mut()
                        .zip(v.data_mut().iter_mut())
                        .zip(grad.data())
                        .zip(param.data_mut().iter_mut())
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * g;
                        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                        let mhat = *mi / bc1;
                        let vhat = *vi / bc2;
                        *p -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
                _ => unreachable!("slot kind matches config"),
            }
        }
        Ok(())
    }
}
