//! The JSON run-configuration schema and the two experiment presets.
//!
//! Configs are schema-validated before any work: unknown keys are rejected
//! everywhere and invariants (lambda >= 0, lr > 0, epochs >= 1, sparsities in
//! [0, 1]) are checked up front.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataSource;
use crate::error::{Error, Result};
use crate::nn::{
    ActivationKind, LayerSpec, Loss, LrSchedule, Model, OptimizerConfig, TrainConfig,
};
use crate::regularizers::RegularizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Inr,
    Classify,
}

/// Compression method named on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[value(name = "svd")]
    Svd,
    #[value(name = "svd_joint")]
    SvdJoint,
    #[value(name = "l1_structured")]
    L1Structured,
    #[value(name = "l1_unstructured")]
    L1Unstructured,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::SvdJoint => "svd_joint",
            Method::L1Structured => "l1_structured",
            Method::L1Unstructured => "l1_unstructured",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub model: ModelPreset,
    pub train: TrainSection,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionConfig>,
    pub paths: PathsConfig,
}

/// Training fields of the config; the run seed is supplied at the top level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub loss: Loss,
    #[serde(default)]
    pub regularizer: RegularizerKind,
    #[serde(default)]
    pub lambda: f64,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default)]
    pub schedule: LrSchedule,
    #[serde(default = "default_metric_every")]
    pub metric_every: usize,
}

fn default_metric_every() -> usize {
    1
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            regularizer: self.regularizer,
            lambda: self.lambda,
            optimizer: self.optimizer.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: self.schedule.clone(),
            metric_every: self.metric_every,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelPreset {
    Inr(InrPreset),
    Classify(ClassifyPreset),
}

/// Coordinate network: a first sine layer from 2 inputs, `hidden_layers`
/// square sine layers, and a linear head to the channel count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InrPreset {
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_hidden_width() -> usize {
    256
}
fn default_hidden_layers() -> usize {
    2
}
fn default_omega0() -> f64 {
    30.0
}

impl Default for InrPreset {
    fn default() -> Self {
        InrPreset {
            hidden_width: default_hidden_width(),
            hidden_layers: default_hidden_layers(),
            omega0: default_omega0(),
        }
    }
}

/// Plain CNN: one stride-`stride` conv per channel entry with ReLU, then a
/// flatten and a linear classifier head.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyPreset {
    #[serde(default = "default_channels")]
    pub channels: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_pad")]
    pub pad: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
}

fn default_channels() -> Vec<usize> {
    vec![16, 32, 64]
}
fn default_kernel() -> usize {
    3
}
fn default_stride() -> usize {
    2
}
fn default_pad() -> usize {
    1
}
fn default_classes() -> usize {
    2
}

impl Default for ClassifyPreset {
    fn default() -> Self {
        ClassifyPreset {
            channels: default_channels(),
            kernel: default_kernel(),
            stride: default_stride(),
            pad: default_pad(),
            classes: default_classes(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// File path or `synth:` pseudo-path.
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    /// Coordinate subsampling for the INR training split (test uses the
    /// full grid).
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    /// Seeded pad-4-then-crop hook for classification; off by default.
    #[serde(default)]
    pub augment: bool,
}

fn default_subsample() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    pub method: Method,
    pub sparsities: Vec<f64>,
    #[serde(default)]
    pub skip_when_larger: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Subdirectory under the results root for everything this run writes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results_dir: Option<String>,
    pub model_out: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_out: Option<String>,
}

/// Environment variable naming the directory all relative output paths are
/// resolved against.
pub const RESULTS_ROOT_ENV: &str = "SMOOTHCOMP_RESULTS";

/// Resolve an output path against `$SMOOTHCOMP_RESULTS` (default `.`) and
/// the config's `results_dir`.
pub fn resolve_output(results_dir: Option<&str>, file: &str) -> std::path::PathBuf {
    let mut root = std::path::PathBuf::from(
        std::env::var(RESULTS_ROOT_ENV).unwrap_or_else(|_| ".".into()),
    );
    if let Some(dir) = results_dir {
        root.push(dir);
    }
    root.push(file);
    root
}

impl RunConfig {
    /// Parse and validate a config file. Schema violations carry the
    /// serde line/field diagnostics.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.task, &self.model) {
            (Task::Inr, ModelPreset::Inr(_)) | (Task::Classify, ModelPreset::Classify(_)) => {}
            _ => {
                return Err(Error::Config(
                    "task and model preset kinds do not match".into(),
                ))
            }
        }
        if let ModelPreset::Inr(p) = &self.model {
            if p.hidden_width == 0 || p.hidden_layers == 0 {
                return Err(Error::Config("inr preset dims must be positive".into()));
            }
        }
        if let ModelPreset::Classify(p) = &self.model {
            if p.channels.is_empty() || p.classes < 2 || p.kernel == 0 || p.stride == 0 {
                return Err(Error::Config("classify preset dims must be positive".into()));
            }
        }
        if self.data.subsample == 0 {
            return Err(Error::Config("subsample must be >= 1".into()));
        }
        if let Some(c) = &self.compression {
            if c.sparsities.is_empty() {
                return Err(Error::Config("compression.sparsities is empty".into()));
            }
            if c.sparsities.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::Config("sparsities must lie in [0, 1]".into()));
            }
        }
        // Reuses the train-loop invariants (lambda >= 0, lr > 0, epochs >= 1).
        self.train.to_train_config(self.seed).validate()
    }

    /// Build the preset model for this config, given the resolved data.
    pub fn build_model(&self, source: &DataSource) -> Result<Model> {
        match (&self.model, source) {
            (ModelPreset::Inr(p), DataSource::Image(img)) => {
                let channels = img.shape()[0];
                Ok(inr_model(p, channels)?)
            }
            (ModelPreset::Classify(p), DataSource::Labeled(ds)) => {
                let shape = ds.sample_shape();
                if shape.len() != 3 {
                    return Err(Error::Config(format!(
                        "classify data must be c x h x w images, got {shape:?}"
                    )));
                }
                classify_model(p, shape[0], shape[1], shape[2])
            }
            (ModelPreset::Inr(_), _) => Err(Error::Config(
                "inr task needs image data (png, pgm, synth:gradient, synth:blob)".into(),
            )),
            (ModelPreset::Classify(_), _) => Err(Error::Config(
                "classify task needs labeled data (idx or synth:rings)".into(),
            )),
        }
    }
}

/// Sine coordinate network over `(y, x)` inputs in [-1, 1].
pub fn inr_model(preset: &InrPreset, out_channels: usize) -> Result<Model> {
    let w = preset.hidden_width;
    let sine = ActivationKind::Sine {
        omega0: preset.omega0,
    };
    let mut specs = vec![LayerSpec::dense(2, w, true), LayerSpec::activation(sine)];
    for _ in 0..preset.hidden_layers {
        specs.push(LayerSpec::dense(w, w, true));
        specs.push(LayerSpec::activation(sine));
    }
    specs.push(LayerSpec::dense(w, out_channels, true));
    Model::new(vec![2], specs)
}

/// Conv-relu stack with a linear head.
pub fn classify_model(
    preset: &ClassifyPreset,
    in_channels: usize,
    h: usize,
    w: usize,
) -> Result<Model> {
    let mut specs = Vec::new();
    let mut c = in_channels;
    for &out in &preset.channels {
        specs.push(LayerSpec::conv2d(
            c,
            out,
            [preset.kernel, preset.kernel],
            preset.stride,
            preset.pad,
            true,
        ));
        specs.push(LayerSpec::activation(ActivationKind::Relu));
        c = out;
    }
    specs.push(LayerSpec::Flatten);
    // The head's input width falls out of the conv geometry.
    let probe = Model::new(vec![in_channels, h, w], specs.clone())?;
    let features = probe.output_shape()[0];
    specs.push(LayerSpec::dense(features, preset.classes, true));
    Model::new(vec![in_channels, h, w], specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config(lambda: f64) -> String {
        format!(
            r#"{{
  "task": "inr",
  "seed": 0,
  "model": {{ "inr": {{ "hidden_width": 32 }} }},
  "train": {{
    "loss": "mse",
    "regularizer": "nuc",
    "lambda": {lambda},
    "optimizer": {{ "kind": "adam", "lr": 0.01 }},
    "epochs": 10
  }},
  "data": {{ "input": "synth:gradient:16x16" }},
  "paths": {{ "model_out": "model.json" }}
}}"#
        )
    }

    #[test]
    fn lambda_sweep_values_accepted_verbatim() {
        for lambda in [0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0] {
            let cfg: RunConfig = serde_json::from_str(&minimal_config(lambda)).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.train.lambda, lambda);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_config(0.0).replace("\"seed\": 0", "\"seed\": 0, \"extra\": 1");
        let parsed: std::result::Result<RunConfig, _> = serde_json::from_str(&text);
        assert!(parsed.is_err());
    }

    #[test]
    fn invariants_are_checked() {
        let bad = minimal_config(-1.0);
        let cfg: RunConfig = serde_json::from_str(&bad).unwrap();
        assert!(cfg.validate().is_err());
        let bad_lr = minimal_config(0.0).replace("\"lr\": 0.01", "\"lr\": 0.0");
        let cfg: RunConfig = serde_json::from_str(&bad_lr).unwrap();
        assert!(cfg.validate().is_err());
        let mismatched = minimal_config(0.0).replace("\"task\": \"inr\"", "\"task\": \"classify\"");
        let cfg: RunConfig = serde_json::from_str(&mismatched).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn inr_preset_shape() {
        let m = inr_model(
            &InrPreset {
                hidden_width: 16,
                hidden_layers: 2,
                omega0: 30.0,
            },
            3,
        )
        .unwrap();
        // dense 2->16, two 16x16 hidden, head 16->3; sines in between.
        assert_eq!(m.layer_count(), 4);
        assert_eq!(m.output_shape(), vec![3]);
    }

    #[test]
    fn classify_preset_head_matches_geometry() {
        let m = classify_model(&ClassifyPreset::default(), 1, 12, 12).unwrap();
        assert_eq!(m.output_shape(), vec![2]);
        // 12 -> 6 -> 3 -> 2 spatial under stride 2 pad 1 kernel 3.
        let shapes = m.layer_input_shapes();
        assert_eq!(shapes[shapes.len() - 2], vec![64 * 2 * 2]);
    }
}
