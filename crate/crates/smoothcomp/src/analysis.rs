//! Singular-value spectra, weight-slice export, and task metrics.

use std::fmt::Write as _;

use crate::data::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::regularizers::flatten_for_reg;
use crate::tensor::Tensor;

/// Whether cumulative curves sum singular values or their squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveKind {
    /// Cumulative percentage of the singular-value sum.
    #[default]
    Value,
    /// Cumulative percentage of sigma^2 (retained energy).
    Energy,
}

/// Spectrum of one parameterized layer, or the reason it failed.
#[derive(Debug, Clone)]
pub enum LayerSpectrum {
    Ok {
        name: String,
        sigma: Vec<f64>,
        /// `c[k-1]` is the fraction captured by the top `k` values;
        /// non-decreasing, ending at 1.
        cumulative: Vec<f64>,
    },
    Failed {
        name: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub curve: CurveKind,
    pub layers: Vec<LayerSpectrum>,
}

impl SpectrumReport {
    /// Mean over layers of the cumulative value at the given fraction of
    /// each layer's own maximum rank (fraction in (0, 1]).
    pub fn mean_cumulative_at(&self, fraction: f64) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for layer in &self.layers {
            if let LayerSpectrum::Ok { cumulative, .. } = layer {
                let k_max = cumulative.len();
                let k = ((fraction * k_max as f64).round() as usize).clamp(1, k_max);
                sum += cumulative[k - 1];
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean cumulative curve sampled at percent 1..=100 of max rank.
    pub fn mean_curve(&self) -> Vec<f64> {
        (1..=100)
            .map(|pct| self.mean_cumulative_at(pct as f64 / 100.0).unwrap_or(1.0))
            .collect()
    }
}

/// Singular-value spectra of every parameterized layer's flattened weight.
///
/// A layer whose SVD fails contributes an error entry; the report is still
/// produced for the rest.
pub fn spectrum(model: &Model) -> SpectrumReport {
    spectrum_with(model, CurveKind::Value)
}

pub fn spectrum_with(model: &Model, curve: CurveKind) -> SpectrumReport {
    let mut layers = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let Some(w) = &layer.weight else { continue };
        let name = format!("layer{i}_{}", layer.spec.kind_name());
        let entry = match flatten_for_reg(w).and_then(|flat| flat.svd()) {
            Ok(f) => {
                let sigma = f.sigma().to_vec();
                let weigh = |s: f64| match curve {
                    CurveKind::Value => s,
                    CurveKind::Energy => s * s,
                };
                let total: f64 = sigma.iter().map(|&s| weigh(s)).sum();
                let mut cumulative = Vec::with_capacity(sigma.len());
                let mut acc = 0.0;
                for &s in &sigma {
                    acc += weigh(s);
                    // All-zero weights retain everything at every k.
                    cumulative.push(if total > 0.0 { acc / total } else { 1.0 });
                }
                if let Some(last) = cumulative.last_mut() {
                    *last = 1.0;
                }
                LayerSpectrum::Ok {
                    name,
                    sigma,
                    cumulative,
                }
            }
            Err(e) => LayerSpectrum::Failed {
                name,
                message: e.to_string(),
            },
        };
        layers.push(entry);
    }
    SpectrumReport { curve, layers }
}

/// The `h x w` kernels of one input channel of a conv layer, one row per
/// output channel (row-major kernel entries: left to right, top to bottom).
pub fn weight_slice(model: &Model, layer: usize, input_channel: usize) -> Result<Tensor> {
    let l = model
        .layers
        .get(layer)
        .ok_or_else(|| Error::arg(format!("no layer {layer}")))?;
    let w = match (&l.spec, &l.weight) {
        (crate::nn::LayerSpec::Conv2d { .. }, Some(w)) => w,
        _ => {
            return Err(Error::arg(format!(
                "layer {layer} is not a conv layer"
            )))
        }
    };
    let (n_o, n_i, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    if input_channel >= n_i {
        return Err(Error::arg(format!(
            "input channel {input_channel} out of range 0..{n_i}"
        )));
    }
    let mut out = Tensor::zeros([n_o, kh * kw]);
    for o in 0..n_o {
        for e in 0..kh * kw {
            out.data_mut()[o * kh * kw + e] = w.data()[((o * n_i + input_channel) * kh * kw) + e];
        }
    }
    Ok(out)
}

/// CSV text for a weight slice. Full-precision floats so the export
/// re-imports exactly; the comment line records the kernel ordering.
pub fn weight_slice_csv(slice: &Tensor, kh: usize, kw: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# rows are output channels; kernel entries {kh}x{kw} row-major (left to right, top to bottom)"
    );
    let _ = write!(out, "output_channel");
    for e in 0..slice.cols() {
        let _ = write!(out, ",k{}", e);
    }
    out.push('\n');
    for o in 0..slice.rows() {
        let _ = write!(out, "{o}");
        for e in 0..slice.cols() {
            let _ = write!(out, ",{}", slice.get2(o, e));
        }
        out.push('\n');
    }
    out
}

/// Parse [`weight_slice_csv`] output back into the slice matrix.
pub fn weight_slice_from_csv(text: &str) -> Result<Tensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("output_channel") || line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let _channel = fields.next();
        let row: std::result::Result<Vec<f64>, _> =
            fields.map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::arg(format!("bad slice csv field: {e}")))?);
    }
    if rows.is_empty() {
        return Err(Error::arg("slice csv has no data rows"));
    }
    Ok(Tensor::from_rows(&rows))
}

/// Peak signal-to-noise ratio in dB with peak 1.0. Identical images give
/// `f64::INFINITY`.
pub fn psnr(reference: &Tensor, candidate: &Tensor) -> Result<f64> {
    if reference.shape() != candidate.shape() {
        return Err(Error::shape(format!(
            "psnr shapes {:?} vs {:?}",
            reference.shape(),
            candidate.shape()
        )));
    }
    let n = reference.numel() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(candidate.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    Ok(psnr_from_mse(mse))
}

/// `10 * log10(1 / mse)` with the zero-MSE infinity sentinel.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Fraction of samples whose argmax output matches the label. Ties pick the
/// lowest class index.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    let Targets::Labels(labels) = &data.targets else {
        return Err(Error::arg("accuracy needs a labeled dataset"));
    };
    if data.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(256) {
        let (x, _) = data.gather(chunk)?;
        let logits = model.forward(&x)?;
        let c = logits.shape()[1];
        for (row, &i) in chunk.iter().enumerate() {
            let mut best = 0usize;
            let mut best_v = logits.data()[row * c];
            for j in 1..c {
                let v = logits.data()[row * c + j];
                if v > best_v {
                    best = j;
                    best_v = v;
                }
            }
            if best == labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
