//! Datasets, synthetic data generators, and image/IDX ingestion.
//!
//! Synthetic inputs are addressed by pseudo-paths so result files are a pure
//! function of the run configuration:
//!
//! - `synth:gradient:HxW` — diagonal gradient image, pixel `(y, x)` equals
//!   `(x + y) / ((w - 1) + (h - 1))`
//! - `synth:blob:HxW:seedN` — sum of seeded Gaussian blobs
//! - `synth:rings:COUNT:seedN[:HxW]` — two-class set of ring images
//!   (class 0 small radius, class 1 large), 12x12 by default

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::BatchTarget;
use crate::tensor::Tensor;

/// Supervised dataset with per-sample tensors.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub targets: Targets,
}

#[derive(Debug, Clone)]
pub enum Targets {
    /// Regression targets, one tensor per sample.
    Values(Vec<Tensor>),
    /// Class indices.
    Labels(Vec<usize>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Per-sample input shape.
    pub fn sample_shape(&self) -> &[usize] {
        self.inputs[0].shape()
    }

    /// Stack the listed samples into a batch tensor and matching target.
    pub fn gather(&self, idx: &[usize]) -> Result<(Tensor, BatchTarget)> {
        if idx.is_empty() {
            return Err(Error::arg("empty batch"));
        }
        let shape = self.sample_shape().to_vec();
        let sample_len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(idx.len() * sample_len);
        for &i in idx {
            data.extend_from_slice(self.inputs[i].data());
        }
        let mut batch_shape = vec![idx.len()];
        batch_shape.extend_from_slice(&shape);
        let x = Tensor::new(batch_shape, data)?;
        let y = match &self.targets {
            Targets::Values(vals) => {
                let tlen = vals[0].numel();
                let mut tdata = Vec::with_capacity(idx.len() * tlen);
                for &i in idx {
                    tdata.extend_from_slice(vals[i].data());
                }
                BatchTarget::Values(Tensor::new(vec![idx.len(), tlen], tdata)?)
            }
            Targets::Labels(labels) => {
                BatchTarget::Labels(idx.iter().map(|&i| labels[i]).collect())
            }
        };
        Ok((x, y))
    }
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Diagonal gradient image `1 x h x w` in [0, 1].
pub fn synth_gradient(h: usize, w: usize) -> Tensor {
    let denom = ((w - 1) + (h - 1)).max(1) as f64;
    let mut img = Tensor::zeros([1, h, w]);
    for y in 0..h {
        for x in 0..w {
            img.data_mut()[y * w + x] = (x + y) as f64 / denom;
        }
    }
    img
}

/// Sum of a few seeded Gaussian blobs, normalized to [0, 1].
pub fn synth_blob(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.2..0.8) * h as f64,
                rng.gen_range(0.2..0.8) * w as f64,
                rng.gen_range(0.08..0.25) * h.min(w) as f64,
                rng.gen_range(0.5..1.0),
            )
        })
        .collect();
    let mut img = Tensor::zeros([1, h, w]);
    let mut max = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let mut v = 0.0;
            for &(cy, cx, s, amp) in &blobs {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                v += amp * (-d2 / (2.0 * s * s)).exp();
            }
            img.data_mut()[y * w + x] = v;
            max = max.max(v);
        }
    }
    if max > 0.0 {
        for v in img.data_mut() {
            *v /= max;
        }
    }
    img
}

/// Two-class set of `1 x h x w` ring images: class 0 has a small mean
/// radius, class 1 a large one. The rings are randomly rotated ellipses with
/// jittered centers, variable thickness and amplitude, and pixel noise, so
/// the classes are separable only by genuinely spatial features.
pub fn synth_rings(count: usize, h: usize, w: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = h.min(w) as f64 / 12.0;
    let mut inputs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 2;
        let radius = if class == 0 {
            rng.gen_range(2.1..3.45)
        } else {
            rng.gen_range(3.65..5.0)
        } * scale;
        let cy = h as f64 / 2.0 + rng.gen_range(-1.6..1.6) * scale;
        let cx = w as f64 / 2.0 + rng.gen_range(-1.6..1.6) * scale;
        let aspect = rng.gen_range(0.72..1.38f64);
        let (sin_t, cos_t) = rng.gen_range(0.0..std::f64::consts::PI).sin_cos();
        let thickness = rng.gen_range(0.55..1.25) * scale;
        let amplitude = rng.gen_range(0.55..1.0);
        let mut img = Tensor::zeros([1, h, w]);
        for y in 0..h {
            for x in 0..w {
                let dy = y as f64 - cy;
                let dx = x as f64 - cx;
                // Elliptical distance in the rotated frame; aspect preserves
                // area so the mean radius still separates the classes.
                let u = (cos_t * dx + sin_t * dy) / aspect.sqrt();
                let v = (-sin_t * dx + cos_t * dy) * aspect.sqrt();
                let d = (u * u + v * v).sqrt();
                let ring = amplitude * (-(d - radius).powi(2) / (2.0 * thickness * thickness)).exp();
                let noise = rng.gen_range(-0.25..0.25);
                img.data_mut()[y * w + x] = (ring + noise).clamp(0.0, 1.0);
            }
        }
        inputs.push(img);
        labels.push(class);
    }
    Dataset {
        inputs,
        targets: Targets::Labels(labels),
    }
}

/// Seeded pad-then-crop hook for classification data: each image is zero
/// padded by `pad` pixels and cropped back to its original size at a random
/// offset. Applied once at ingestion; off by default.
pub fn augment_pad_crop(data: &Dataset, pad: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    let mut inputs = Vec::with_capacity(data.len());
    for img in &data.inputs {
        if img.rank() != 3 {
            return Err(Error::shape(format!(
                "augmentation expects c x h x w samples, got {:?}",
                img.shape()
            )));
        }
        let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
        let oy = rng.gen_range(0..=2 * pad);
        let ox = rng.gen_range(0..=2 * pad);
        let mut out = Tensor::zeros([c, h, w]);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    // Source position in the padded frame.
                    let sy = y as isize + oy as isize - pad as isize;
                    let sx = x as isize + ox as isize - pad as isize;
                    if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                        out.data_mut()[ch * h * w + y * w + x] =
                            img.data()[ch * h * w + sy as usize * w + sx as usize];
                    }
                }
            }
        }
        inputs.push(out);
    }
    Ok(Dataset {
        inputs,
        targets: data.targets.clone(),
    })
}

/// Turn an image into a coordinate regression set: inputs are `(y, x)`
/// positions scaled to [-1, 1], targets the pixel channels. `subsample`
/// keeps every k-th pixel along each axis (1 = all pixels).
pub fn image_to_coord_dataset(img: &Tensor, subsample: usize) -> Result<Dataset> {
    if img.rank() != 3 {
        return Err(Error::shape(format!(
            "expected c x h x w image, got {:?}",
            img.shape()
        )));
    }
    if subsample == 0 {
        return Err(Error::arg("subsample must be >= 1"));
    }
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    let mut inputs = Vec::new();
    let mut values = Vec::new();
    for y in (0..h).step_by(subsample) {
        for x in (0..w).step_by(subsample) {
            let cy = if h > 1 { 2.0 * y as f64 / (h - 1) as f64 - 1.0 } else { 0.0 };
            let cx = if w > 1 { 2.0 * x as f64 / (w - 1) as f64 - 1.0 } else { 0.0 };
            inputs.push(Tensor::new([2], vec![cy, cx])?);
            let px: Vec<f64> = (0..c).map(|ch| img.data()[ch * h * w + y * w + x]).collect();
            values.push(Tensor::new([c], px)?);
        }
    }
    Ok(Dataset {
        inputs,
        targets: Targets::Values(values),
    })
}

/// Rebuild a `c x h x w` image from per-coordinate model outputs laid out in
/// the row-major order produced by [`image_to_coord_dataset`] at subsample 1.
pub fn coords_to_image(preds: &Tensor, c: usize, h: usize, w: usize) -> Result<Tensor> {
    if preds.shape() != [h * w, c] {
        return Err(Error::shape(format!(
            "expected {} x {c} predictions, got {:?}",
            h * w,
            preds.shape()
        )));
    }
    let mut img = Tensor::zeros([c, h, w]);
    for p in 0..h * w {
        for ch in 0..c {
            img.data_mut()[ch * h * w + p] = preds.data()[p * c + ch];
        }
    }
    Ok(img)
}

// ---------------------------------------------------------------------------
// File ingestion
// ---------------------------------------------------------------------------

/// Decode a PNG or PGM file to a `c x h x w` tensor in [0, 1].
pub fn ingest_image(path: &Path) -> Result<Tensor> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => {
            let bytes = fs::read(path)?;
            parse_pgm(&bytes, path)
        }
        "png" => {
            let img = image::open(path).map_err(|e| Error::DataFormat {
                path: path.to_path_buf(),
                offset: 0,
                message: format!("png decode failed: {e}"),
            })?;
            Ok(match img {
                image::DynamicImage::ImageLuma8(g) => {
                    let (w, h) = (g.width() as usize, g.height() as usize);
                    let data = g.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
                    Tensor::new([1, h, w], data)?
                }
                other => {
                    let rgb = other.to_rgb8();
                    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                    let raw = rgb.into_raw();
                    let mut data = vec![0.0; 3 * h * w];
                    for y in 0..h {
                        for x in 0..w {
                            for ch in 0..3 {
                                data[ch * h * w + y * w + x] =
                                    raw[(y * w + x) * 3 + ch] as f64 / 255.0;
                            }
                        }
                    }
                    Tensor::new([3, h, w], data)?
                }
            })
        }
        other => Err(Error::DataFormat {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("unsupported image extension {other:?} (png and pgm supported)"),
        }),
    }
}

/// P2 (ASCII) and P5 (binary) graymaps, normalized by the declared maxval.
fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let fail = |offset: usize, message: String| Error::DataFormat {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let mut pos = 0;
    // Whitespace-and-comment-separated header tokens.
    let next_token = |pos: &mut usize| -> Result<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(fail(start, "unexpected end of header".into()));
        }
        Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };

    let (off, magic) = next_token(&mut pos)?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => return Err(fail(off, format!("expected P2 or P5 magic, found {other:?}"))),
    };
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let (off, tok) = next_token(&mut pos)?;
        *d = tok
            .parse()
            .map_err(|_| fail(off, format!("expected integer, found {tok:?}")))?;
    }
    let (w, h, maxval) = (dims[0], dims[1], dims[2]);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(fail(0, format!("bad dimensions {w}x{h} maxval {maxval}")));
    }
    let mut data = Vec::with_capacity(h * w);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let wide = maxval > 255;
        let needed = h * w * if wide { 2 } else { 1 };
        if bytes.len() < pos + needed {
            return Err(fail(
                bytes.len(),
                format!("raster truncated: need {needed} bytes from offset {pos}"),
            ));
        }
        for i in 0..h * w {
            let v = if wide {
                u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]) as usize
            } else {
                bytes[pos + i] as usize
            };
            data.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..h * w {
            let (off, tok) = next_token(&mut pos)?;
            let v: usize = tok
                .parse()
                .map_err(|_| fail(off, format!("expected pixel value, found {tok:?}")))?;
            if v > maxval {
                return Err(fail(off, format!("pixel {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / maxval as f64);
        }
    }
    Tensor::new([1, h, w], data)
}

/// Decode IDX image + label files (big-endian magics 0x00000803 and
/// 0x00000801) into a labeled dataset of `1 x h x w` inputs in [0, 1].
pub fn ingest_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;

    let be_u32 = |bytes: &[u8], offset: usize, path: &Path| -> Result<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::DataFormat {
                path: path.to_path_buf(),
                offset,
                message: "truncated header".into(),
            })
    };

    let magic = be_u32(&images, 0, images_path)?;
    if magic != 0x0000_0803 {
        return Err(Error::DataFormat {
            path: images_path.to_path_buf(),
            offset: 0,
            message: format!("bad image magic 0x{magic:08x}, expected 0x00000803"),
        });
    }
    let n = be_u32(&images, 4, images_path)? as usize;
    let h = be_u32(&images, 8, images_path)? as usize;
    let w = be_u32(&images, 12, images_path)? as usize;
    let expected = 16 + n * h * w;
    if images.len() != expected {
        return Err(Error::DataFormat {
            path: images_path.to_path_buf(),
            offset: images.len().min(expected),
            message: format!("expected {expected} bytes, found {}", images.len()),
        });
    }

    let lmagic = be_u32(&labels, 0, labels_path)?;
    if lmagic != 0x0000_0801 {
        return Err(Error::DataFormat {
            path: labels_path.to_path_buf(),
            offset: 0,
            message: format!("bad label magic 0x{lmagic:08x}, expected 0x00000801"),
        });
    }
    let ln = be_u32(&labels, 4, labels_path)? as usize;
    if ln != n {
        return Err(Error::DataFormat {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!("{ln} labels for {n} images"),
        });
    }
    if labels.len() != 8 + n {
        return Err(Error::DataFormat {
            path: labels_path.to_path_buf(),
            offset: labels.len().min(8 + n),
            message: format!("expected {} bytes, found {}", 8 + n, labels.len()),
        });
    }

    let mut inputs = Vec::with_capacity(n);
    let mut out_labels = Vec::with_capacity(n);
    for i in 0..n {
        let start = 16 + i * h * w;
        let data = images[start..start + h * w]
            .iter()
            .map(|&v| v as f64 / 255.0)
            .collect();
        inputs.push(Tensor::new([1, h, w], data)?);
        out_labels.push(labels[8 + i] as usize);
    }
    Ok(Dataset {
        inputs,
        targets: Targets::Labels(out_labels),
    })
}

// ---------------------------------------------------------------------------
// Pseudo-path parsing
// ---------------------------------------------------------------------------

/// What a data path resolves to.
pub enum DataSource {
    /// A single image, for coordinate-regression tasks.
    Image(Tensor),
    /// A labeled dataset, for classification.
    Labeled(Dataset),
}

/// Resolve a data path: `synth:` pseudo-paths, a `.png`/`.pgm` image, or an
/// IDX image file (with `labels` naming the companion label file).
pub fn load_source(input: &str, labels: Option<&str>) -> Result<DataSource> {
    if let Some(rest) = input.strip_prefix("synth:") {
        return load_synth(rest);
    }
    let path = Path::new(input);
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "png" | "pgm" => Ok(DataSource::Image(ingest_image(path)?)),
        "idx3-ubyte" | "idx" | "ubyte" => {
            let labels = labels.ok_or_else(|| {
                Error::Config("idx data needs a labels path".into())
            })?;
            Ok(DataSource::Labeled(ingest_idx(path, Path::new(labels))?))
        }
        other => Err(Error::Config(format!(
            "cannot infer data format from extension {other:?}"
        ))),
    }
}

fn load_synth(spec: &str) -> Result<DataSource> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |msg: &str| Error::Config(format!("synth spec {spec:?}: {msg}"));
    match parts.first() {
        Some(&"gradient") => {
            let (h, w) = parse_dims(parts.get(1).copied().unwrap_or("32x32"))
                .ok_or_else(|| bad("expected HxW"))?;
            Ok(DataSource::Image(synth_gradient(h, w)))
        }
        Some(&"blob") => {
            let (h, w) = parse_dims(parts.get(1).copied().unwrap_or("64x64"))
                .ok_or_else(|| bad("expected HxW"))?;
            let seed = parse_seed(parts.get(2).copied()).ok_or_else(|| bad("expected seedN"))?;
            Ok(DataSource::Image(synth_blob(h, w, seed)))
        }
        Some(&"rings") => {
            let count: usize = parts
                .get(1)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad("expected sample count"))?;
            let seed = parse_seed(parts.get(2).copied()).ok_or_else(|| bad("expected seedN"))?;
            let (h, w) = match parts.get(3) {
                Some(d) => parse_dims(d).ok_or_else(|| bad("expected HxW"))?,
                None => (12, 12),
            };
            Ok(DataSource::Labeled(synth_rings(count, h, w, seed)))
        }
        _ => Err(bad("unknown kind (gradient, blob, rings)")),
    }
}

fn parse_dims(s: &str) -> Option<(usize, usize)> {
    let (h, w) = s.split_once('x')?;
    Some((h.parse().ok()?, w.parse().ok()?))
}

fn parse_seed(s: Option<&str>) -> Option<u64> {
    s?.strip_prefix("seed")?.parse().ok()
}
