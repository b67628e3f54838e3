//! Result-file emission: fixed-column CSVs with 6-significant-digit floats,
//! UTF-8, LF line endings. Column orders are documented in the README and
//! never locale-dependent.

use std::fmt::Write as _;

use crate::analysis::{LayerSpectrum, SpectrumReport};
use crate::compress::CompressionReport;
use crate::nn::EpochMetrics;

/// Format with 6 significant digits, trimming trailing zeros; plain decimal
/// notation inside a sane exponent range, scientific outside it.
pub fn fmt_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..=8).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let s = format!("{v:.5e}");
        // Trim mantissa zeros: 1.200000e-7 -> 1.2e-7
        match s.split_once('e') {
            Some((mantissa, exp)) => format!("{}e{exp}", trim_zeros(mantissa.to_string())),
            None => s,
        }
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// `epoch,lr,data_loss,reg_value,total_loss,metric` — metric blank on epochs
/// where it was not measured.
pub fn metrics_csv(log: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,lr,data_loss,reg_value,total_loss,metric\n");
    for row in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.epoch,
            fmt_g6(row.lr),
            fmt_g6(row.data_loss),
            fmt_g6(row.reg_value),
            fmt_g6(row.total_loss),
            row.metric.map(fmt_g6).unwrap_or_default(),
        );
    }
    out
}

/// One row per (method, target sparsity):
/// `method,target_sparsity,achieved_sparsity,params_before,params_after,ranks,reconstruction_errors,metric_before,metric_after`
/// with ranks `layer:rank` (`layer:-` when kept) joined by `;`.
pub fn compression_csv(rows: &[(String, CompressionReport)]) -> String {
    let mut out = String::from(
        "method,target_sparsity,achieved_sparsity,params_before,params_after,ranks,reconstruction_errors,metric_before,metric_after\n",
    );
    for (method, report) in rows {
        let target = report
            .plan
            .entries
            .first()
            .map(|e| e.target_sparsity)
            .unwrap_or(f64::NAN);
        let ranks = report
            .plan
            .entries
            .iter()
            .map(|e| match e.rank {
                Some(r) => format!("{}:{r}", e.layer_index),
                None => format!("{}:-", e.layer_index),
            })
            .collect::<Vec<_>>()
            .join(";");
        let errors = report
            .plan
            .entries
            .iter()
            .map(|e| fmt_g6(e.reconstruction_error))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{method},{},{},{},{},{ranks},{errors},{},{}",
            fmt_g6(target),
            fmt_g6(report.plan.achieved_sparsity),
            report.plan.params_before,
            report.plan.params_after,
            report.metric_before.map(fmt_g6).unwrap_or_default(),
            report.metric_after.map(fmt_g6).unwrap_or_default(),
        );
    }
    out
}

/// `layer,k,sigma,cumulative` for every layer, then the mean curve sampled
/// at percent 1..=100 of each layer's max rank (`layer` = `mean`, `k` = the
/// percent, sigma blank). Failed layers emit `layer,error,<message>` rows.
pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut out = String::from("layer,k,sigma,cumulative\n");
    for layer in &report.layers {
        match layer {
            LayerSpectrum::Ok {
                name,
                sigma,
                cumulative,
            } => {
                for (i, (&s, &c)) in sigma.iter().zip(cumulative).enumerate() {
                    let _ = writeln!(out, "{name},{},{},{}", i + 1, fmt_g6(s), fmt_g6(c));
                }
            }
            LayerSpectrum::Failed { name, message } => {
                let _ = writeln!(out, "{name},error,{},", message.replace(',', ";"));
            }
        }
    }
    for (pct, c) in report.mean_curve().iter().enumerate() {
        let _ = writeln!(out, "mean,{},,{}", pct + 1, fmt_g6(*c));
    }
    out
}

/// Metric JSON for `evaluate`; infinity renders as the string `"inf"`.
pub fn metric_json(task: &str, metric_name: &str, value: f64) -> String {
    if value.is_finite() {
        format!("{{\"task\":\"{task}\",\"{metric_name}\":{value}}}\n")
    } else {
        format!("{{\"task\":\"{task}\",\"{metric_name}\":\"inf\"}}\n")
    }
}
