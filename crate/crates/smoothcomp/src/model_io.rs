//! Model files: a JSON manifest plus a binary parameter sidecar.
//!
//! The manifest records the format version, input shape, every layer spec,
//! training provenance, and the declared parameter count. The sidecar holds
//! all parameters as little-endian f32, layers in manifest order, weight then
//! bias per layer; its byte length must equal `param_count * 4`. Computation
//! stays in f64; only storage narrows to f32, so save -> load -> save is
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Model};
use crate::regularizers::RegularizerKind;
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

/// How the stored model was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub lambda: f64,
    pub regularizer: RegularizerKind,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    provenance: Provenance,
    /// Number of stored f32 values in the sidecar.
    param_count: u64,
}

/// Sidecar path: the manifest path with a `.bin` extension.
pub fn sidecar_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Write the manifest and sidecar. Parameters are truncated to f32.
pub fn save_model(model: &Model, provenance: &Provenance, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    let mut count = 0u64;
    for layer in &model.layers {
        for tensor in [&layer.weight, &layer.bias].into_iter().flatten() {
            for &v in tensor.data() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
                count += 1;
            }
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        input_shape: model.input_shape.clone(),
        layers: model.layers.iter().map(|l| l.spec.clone()).collect(),
        provenance: provenance.clone(),
        param_count: count,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, json)?;
    fs::write(sidecar_path(path), bytes)?;
    Ok(())
}

/// Read a model back. The sidecar length is checked against the declared
/// parameter count before any tensor is built.
pub fn load_model(path: &Path) -> Result<(Model, Provenance)> {
    let text = fs::read(path)?;
    let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| {
        Error::ModelFormat(format!("{}: {e}", path.display()))
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let sidecar = sidecar_path(path);
    let bytes = fs::read(&sidecar)?;
    let expected = manifest.param_count as usize * 4;
    if bytes.len() != expected {
        return Err(Error::ModelFormat(format!(
            "{}: sidecar holds {} bytes, manifest declares {} parameters ({expected} bytes)",
            sidecar.display(),
            bytes.len(),
            manifest.param_count
        )));
    }

    // Validates that the specs compose before parameters are filled in.
    let mut model = Model::new(manifest.input_shape, manifest.layers)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    let mut offset = 0usize;
    for layer in &mut model.layers {
        for slot in [&mut layer.weight, &mut layer.bias] {
            let Some(tensor) = slot else { continue };
            let mut data = Vec::with_capacity(tensor.numel());
            for _ in 0..tensor.numel() {
                let raw = [
                    bytes[offset],
                    bytes[offset + 1],
                    bytes[offset + 2],
                    bytes[offset + 3],
                ];
                data.push(f32::from_le_bytes(raw) as f64);
                offset += 4;
            }
            *tensor = Tensor::new(tensor.shape().to_vec(), data)?;
        }
    }
    debug_assert_eq!(offset, bytes.len());
    Ok((model, manifest.provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ActivationKind;

    fn sample_model(seed: u64) -> Model {
        let mut m = Model::new(
            vec![1, 6, 6],
            vec![
                LayerSpec::conv2d(1, 3, [3, 3], 2, 1, true),
                LayerSpec::activation(ActivationKind::Relu),
                LayerSpec::Flatten,
                LayerSpec::dense(3 * 3 * 3, 4, true),
                LayerSpec::activation(ActivationKind::Logits),
            ],
        )
        .unwrap();
        m.init_params(seed);
        m
    }

    fn provenance() -> Provenance {
        Provenance {
            lambda: 0.05,
            regularizer: RegularizerKind::R1,
            seed: 42,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model(1);
        save_model(&model, &provenance(), &path).unwrap();
        let first_manifest = fs::read(&path).unwrap();
        let first_bin = fs::read(sidecar_path(&path)).unwrap();

        let (loaded, prov) = load_model(&path).unwrap();
        assert_eq!(prov, provenance());
        let path2 = dir.path().join("model2.json");
        save_model(&loaded, &prov, &path2).unwrap();
        assert_eq!(first_manifest, fs::read(&path2).unwrap());
        assert_eq!(first_bin, fs::read(sidecar_path(&path2)).unwrap());
    }

    #[test]
    fn sidecar_length_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model(2);
        save_model(&model, &provenance(), &path).unwrap();
        let bin = sidecar_path(&path);
        let mut bytes = fs::read(&bin).unwrap();
        bytes.pop();
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn unknown_manifest_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model(3);
        save_model(&model, &provenance(), &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text = text.replacen("{", "{\n  \"surprise\": 1,", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn loaded_params_are_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model(4);
        save_model(&model, &provenance(), &path).unwrap();
        let (loaded, _) = load_model(&path).unwrap();
        for (a, b) in model.layers.iter().zip(&loaded.layers) {
            let (w1, w2) = (a.weight.as_ref(), b.weight.as_ref());
            if let (Some(w1), Some(w2)) = (w1, w2) {
                for (&x, &y) in w1.data().iter().zip(w2.data()) {
                    assert_eq!(x as f32 as f64, y);
                }
            }
        }
    }
}
