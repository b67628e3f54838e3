//! Deterministic mini-batch training loop.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::data::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::nn::{loss_and_grads, Loss, Model, Optimizer};
use crate::nn::{LrSchedule, OptimizerConfig};
use crate::regularizers::{self, RegularizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: Loss,
    #[serde(default)]
    pub regularizer: RegularizerKind,
    /// Smoothing factor weighting the regularizer against the data term.
    #[serde(default)]
    pub lambda: f64,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// 0 means full-batch.
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default)]
    pub schedule: LrSchedule,
    /// Task-metric cadence in epochs; the final epoch is always measured.
    #[serde(default = "default_metric_every")]
    pub metric_every: usize,
    pub seed: u64,
}

fn default_metric_every() -> usize {
    1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.metric_every == 0 {
            return Err(Error::Config("metric_every must be >= 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Task metric logged alongside the losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    None,
    /// PSNR of the predictions against the dataset targets, in dB.
    Psnr,
    /// Argmax accuracy against the dataset labels.
    Accuracy,
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub data_loss: f64,
    /// Value of the configured regularizer after the epoch's updates.
    pub reg_value: f64,
    pub total_loss: f64,
    pub metric: Option<f64>,
}

/// Train in place; returns the per-epoch log. Fully deterministic for a
/// fixed config and dataset. A non-finite loss aborts with
/// [`Error::Diverged`] carrying the last epoch that completed.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    metric: MetricKind,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let n = data.len();
    let batch_size = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
    let base_lr = cfg.optimizer.base_lr();
    let mut optimizer = Optimizer::new(cfg.optimizer.clone(), model);
    // Distinct stream from parameter init so reordering one never shifts
    // the other.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = base_lr * cfg.schedule.factor(epoch, cfg.epochs);
        indices.shuffle(&mut rng);
        let mut data_loss_sum = 0.0;
        for batch in indices.chunks(batch_size) {
            let (x, y) = data.gather(batch)?;
            let eval = loss_and_grads(model, &x, &y, cfg.loss, cfg.regularizer, cfg.lambda)
                .map_err(|e| diverged(e, epoch, &log))?;
            if !eval.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    last_good: log.last().map(|m: &EpochMetrics| m.epoch),
                });
            }
            data_loss_sum += eval.data_loss * batch.len() as f64;
            optimizer.step(model, &eval.grads, lr)?;
        }
        let data_loss = data_loss_sum / n as f64;
        let reg_value = regularizers::penalty_value(model, cfg.regularizer)?;
        let total_loss = data_loss + cfg.lambda * reg_value;
        let measure = (epoch + 1) % cfg.metric_every == 0 || epoch + 1 == cfg.epochs;
        let metric_value = if measure {
            evaluate_metric(model, data, metric)?
        } else {
            None
        };
        log.push(EpochMetrics {
            epoch,
            lr,
            data_loss,
            reg_value,
            total_loss,
            metric: metric_value,
        });
    }
    Ok(log)
}

fn diverged(e: Error, epoch: usize, log: &[EpochMetrics]) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged {
            epoch,
            last_good: log.last().map(|m| m.epoch),
        },
        other => other,
    }
}

/// Evaluate the task metric over a dataset in forward-only chunks.
pub fn evaluate_metric(
    model: &Model,
    data: &Dataset,
    metric: MetricKind,
) -> Result<Option<f64>> {
    match metric {
        MetricKind::None => Ok(None),
        MetricKind::Accuracy => Ok(Some(analysis::accuracy(model, data)?)),
        MetricKind::Psnr => {
            let Targets::Values(targets) = &data.targets else {
                return Err(Error::arg("psnr metric needs value targets"));
            };
            let mut se = 0.0;
            let mut count = 0usize;
            let idx: Vec<usize> = (0..data.len()).collect();
            for chunk in idx.chunks(512) {
                let (x, _) = data.gather(chunk)?;
                let pred = model.forward(&x)?;
                let c = pred.shape()[1];
                for (row, &i) in chunk.iter().enumerate() {
                    for ch in 0..c {
                        let p = pred.data()[row * c + ch].clamp(0.0, 1.0);
                        let t = targets[i].data()[ch];
                        se += (p - t) * (p - t);
                    }
                    count += c;
                }
            }
            let mse = se / count.max(1) as f64;
            Ok(Some(analysis::psnr_from_mse(mse)))
        }
    }
}
