//! Drivers behind the CLI subcommands. Everything here is a pure function of
//! (config, seed, inputs): reruns produce byte-identical result files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{self, CurveKind};
use crate::compress::{
    compress_model, compress_model_joint, prune_structured_l1, prune_unstructured_l1,
    CompressOptions, CompressionPlan, CompressionReport, LayerPlan,
};
use crate::config::{resolve_output, Method, RunConfig, Task};
use crate::data::{self, DataSource, Dataset};
use crate::error::{Error, Result};
use crate::model_io::{load_model, save_model, Provenance};
use crate::nn::{self, MetricKind, Model};
use crate::report;
use crate::tensor::Tensor;

/// `train --config <json>`: train the preset model and write the model file
/// plus the per-epoch metrics CSV.
pub fn cmd_train(config_path: &Path) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let source = load_data(&cfg.data.input, cfg.data.labels.as_deref())?;
    let (dataset, metric) = training_set(&cfg, &source)?;
    let mut model = cfg.build_model(&source)?;
    model.init_params(cfg.seed);

    let train_cfg = cfg.train.to_train_config(cfg.seed);
    let log = nn::train(&mut model, &dataset, &train_cfg, metric)?;

    let provenance = Provenance {
        lambda: cfg.train.lambda,
        regularizer: cfg.train.regularizer,
        seed: cfg.seed,
    };
    let results_dir = cfg.paths.results_dir.as_deref();
    let model_path = resolve_output(results_dir, &cfg.paths.model_out);
    save_model(&model, &provenance, &model_path)?;

    let metrics_name = match &cfg.paths.metrics_out {
        Some(name) => name.clone(),
        None => derived_name(&cfg.paths.model_out, "_metrics.csv"),
    };
    let metrics_path = resolve_output(results_dir, &metrics_name);
    write_text(&metrics_path, &report::metrics_csv(&log))?;

    if let Some(last) = log.last() {
        let metric_str = last.metric.map(report::fmt_g6).unwrap_or_default();
        log::info!(
            "trained {} epochs; final loss {}; metric {metric_str}; model at {}",
            log.len(),
            report::fmt_g6(last.total_loss),
            model_path.display()
        );
    }
    Ok(())
}

pub struct CompressArgs {
    pub model: PathBuf,
    pub method: Method,
    pub sparsities: Vec<f64>,
    /// Optional evaluation data; metrics stay blank without it.
    pub data: Option<String>,
    pub labels: Option<String>,
    pub out_dir: Option<String>,
    pub skip_when_larger: bool,
}

/// `compress --model <file> --method <m> --sparsity <list>`: write one
/// compressed model per sparsity plus a report CSV. The input model file is
/// never modified.
pub fn cmd_compress(args: &CompressArgs) -> Result<()> {
    if args.sparsities.is_empty() {
        return Err(Error::Config("no sparsities given".into()));
    }
    for &s in &args.sparsities {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Config(format!("sparsity {s} outside [0, 1]")));
        }
    }
    let (model, provenance) = load_model(&args.model)?;
    let eval = args
        .data
        .as_deref()
        .map(|d| load_data(d, args.labels.as_deref()))
        .transpose()?
        .map(|source| eval_dataset(&model, &source))
        .transpose()?;
    let metric_before = eval
        .as_ref()
        .map(|(ds, metric)| eval_metric(&model, ds, *metric))
        .transpose()?;

    let stem = file_stem(&args.model);
    let out_dir = args.out_dir.as_deref();
    let mut rows = Vec::new();
    for &s in &args.sparsities {
        let (compressed, mut report) = run_method(&model, args.method, s, args.skip_when_larger)?;
        report.metric_before = metric_before;
        if let Some((ds, metric)) = &eval {
            report.metric_after = Some(eval_metric(&compressed, ds, *metric)?);
        }
        let out_name = format!("{stem}_{}_s{:.4}.json", args.method.name(), s);
        save_model(&compressed, &provenance, &resolve_output(out_dir, &out_name))?;
        rows.push((args.method.name().to_string(), report));
    }
    let report_path = resolve_output(
        out_dir,
        &format!("{stem}_{}_report.csv", args.method.name()),
    );
    write_text(&report_path, &report::compression_csv(&rows))?;
    Ok(())
}

fn run_method(
    model: &Model,
    method: Method,
    sparsity: f64,
    skip_when_larger: bool,
) -> Result<(Model, CompressionReport)> {
    match method {
        Method::Svd => compress_model(model, sparsity, CompressOptions { skip_when_larger }),
        Method::SvdJoint => compress_model_joint(model, sparsity),
        Method::L1Structured => {
            let start = std::time::Instant::now();
            let pruned = prune_structured_l1(model, sparsity)?;
            Ok((pruned.clone(), prune_report(model, &pruned, sparsity, start)))
        }
        Method::L1Unstructured => {
            let start = std::time::Instant::now();
            let pruned = prune_unstructured_l1(model, sparsity)?;
            let zeroed: usize = pruned
                .layers
                .iter()
                .filter_map(|l| l.weight.as_ref())
                .map(|w| w.data().iter().filter(|&&v| v == 0.0).count())
                .sum();
            let weights: usize = pruned
                .layers
                .iter()
                .filter_map(|l| l.weight.as_ref())
                .map(Tensor::numel)
                .sum();
            let mut report = prune_report(model, &pruned, sparsity, start);
            // Tensor shapes are unchanged; achieved sparsity is the zeroed
            // fraction of weight entries.
            report.plan.achieved_sparsity = zeroed as f64 / weights as f64;
            Ok((pruned, report))
        }
    }
}

fn prune_report(
    original: &Model,
    pruned: &Model,
    target: f64,
    start: std::time::Instant,
) -> CompressionReport {
    let before = original.param_count();
    let after = pruned.param_count();
    CompressionReport {
        plan: CompressionPlan {
            entries: vec![LayerPlan {
                layer_index: 0,
                target_sparsity: target,
                rank: None,
                params_before: before,
                params_after: after,
                achieved_sparsity: 1.0 - after as f64 / before as f64,
                reconstruction_error: 0.0,
            }],
            params_before: before,
            params_after: after,
            achieved_sparsity: 1.0 - after as f64 / before as f64,
        },
        metric_before: None,
        metric_after: None,
        wall: start.elapsed(),
    }
}

/// `spectrum --model <file>`: singular-value spectrum CSV.
pub fn cmd_spectrum(model_path: &Path, out: Option<&str>, energy: bool) -> Result<()> {
    let (model, _) = load_model(model_path)?;
    let curve = if energy { CurveKind::Energy } else { CurveKind::Value };
    let report = analysis::spectrum_with(&model, curve);
    let name = match out {
        Some(o) => o.to_string(),
        None => format!("{}_spectrum.csv", file_stem(model_path)),
    };
    write_text(&resolve_output(None, &name), &report::spectrum_csv(&report))?;
    Ok(())
}

/// `evaluate --model <file> --data <path>`: print the task metric as JSON
/// (and optionally write it to a file).
pub fn cmd_evaluate(
    model_path: &Path,
    data_path: &str,
    labels: Option<&str>,
    out: Option<&str>,
) -> Result<()> {
    let (model, _) = load_model(model_path)?;
    let source = load_data(data_path, labels)?;
    let (dataset, metric) = eval_dataset(&model, &source)?;
    let value = eval_metric(&model, &dataset, metric)?;
    let (task, name) = match metric {
        MetricKind::Psnr => ("inr", "psnr"),
        MetricKind::Accuracy => ("classify", "accuracy"),
        MetricKind::None => unreachable!(),
    };
    let json = report::metric_json(task, name, value);
    print!("{json}");
    if let Some(o) = out {
        write_text(&resolve_output(None, o), &json)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn load_data(input: &str, labels: Option<&str>) -> Result<DataSource> {
    data::load_source(input, labels)
}

/// Training split plus metric for the configured task.
fn training_set(cfg: &RunConfig, source: &DataSource) -> Result<(Dataset, MetricKind)> {
    match (&cfg.task, source) {
        (Task::Inr, DataSource::Image(img)) => Ok((
            data::image_to_coord_dataset(img, cfg.data.subsample)?,
            MetricKind::Psnr,
        )),
        (Task::Classify, DataSource::Labeled(ds)) => {
            let ds = if cfg.data.augment {
                data::augment_pad_crop(ds, 4, cfg.seed)?
            } else {
                ds.clone()
            };
            Ok((ds, MetricKind::Accuracy))
        }
        _ => Err(Error::Config(
            "data source does not match the configured task".into(),
        )),
    }
}

/// Evaluation set inferred from the data source kind; INR models evaluate on
/// the full coordinate grid.
fn eval_dataset(model: &Model, source: &DataSource) -> Result<(Dataset, MetricKind)> {
    match source {
        DataSource::Image(img) => {
            if model.input_shape != [2] {
                return Err(Error::Config(
                    "image data evaluates coordinate models (input shape [2])".into(),
                ));
            }
            Ok((data::image_to_coord_dataset(img, 1)?, MetricKind::Psnr))
        }
        DataSource::Labeled(ds) => Ok((ds.clone(), MetricKind::Accuracy)),
    }
}

fn eval_metric(model: &Model, dataset: &Dataset, metric: MetricKind) -> Result<f64> {
    nn::evaluate_metric(model, dataset, metric)?
        .ok_or_else(|| Error::arg("no metric for this task"))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn derived_name(model_out: &str, suffix: &str) -> String {
    let stem = Path::new(model_out)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    match Path::new(model_out).parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            format!("{}/{stem}{suffix}", p.to_string_lossy())
        }
        _ => format!("{stem}{suffix}"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
