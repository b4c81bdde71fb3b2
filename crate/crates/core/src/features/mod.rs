//! Dual-branch spatio-temporal feature extraction.
//!
//! Each chunk component (resized frames, fragmented residuals, fragmented
//! frames) goes through a motion branch and a spatial branch:
//!
//! * motion: the stack is resampled to the backend's clip length, the slow
//!   pathway sees every `slow_subsample`-th frame and the fast pathway sees
//!   all of them; both outputs are globally average pooled and concatenated
//!   slow first.
//! * spatial: every frame is run separately, pooled, and the per-frame
//!   vectors are averaged.
//!
//! The six vectors of a chunk are concatenated in a fixed order, and chunk
//! vectors are averaged into one vector per video.

mod dvqf;
#[cfg(feature = "onnx")]
mod neural;
mod toy;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::buffer::RgbBuffer;
use crate::error::{Error, Result};

pub use dvqf::{read_sidecar, sidecar_path, write_sidecar, DvqfFile, FeatureRecord, SidecarEntry};
#[cfg(feature = "onnx")]
pub use neural::{ModelManifest, NeuralBackend};
pub use toy::{toy_backend_eval, ToyBackend, TOY_BASE_LEN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Toy,
    Neural,
}

/// Backbone geometry and input normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Directory holding `manifest.json` and the model files (neural only).
    pub model_dir: Option<PathBuf>,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub spatial_dim: usize,
    pub input_size: usize,
    pub clip_len: usize,
    pub slow_subsample: usize,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self::base()
    }
}

impl BackendSpec {
    fn with_spatial(spatial_dim: usize) -> Self {
        Self {
            kind: BackendKind::Toy,
            model_dir: None,
            slow_dim: 2048,
            fast_dim: 256,
            spatial_dim,
            input_size: 224,
            clip_len: 32,
            slow_subsample: 4,
            mean: [0.45, 0.45, 0.45],
            std: [0.225, 0.225, 0.225],
        }
    }

    /// SlowFast R50 + Swin-Base widths.
    pub fn base() -> Self {
        Self::with_spatial(1024)
    }

    /// SlowFast R50 + Swin-Large widths.
    pub fn large() -> Self {
        Self::with_spatial(1536)
    }

    /// SlowFast R50 + Swin-Tiny/Small widths.
    pub fn tiny() -> Self {
        Self::with_spatial(768)
    }

    pub fn motion_dim(&self) -> usize {
        self.slow_dim + self.fast_dim
    }

    pub fn fused_dim(&self) -> usize {
        3 * (self.motion_dim() + self.spatial_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slow_dim + self.fast_dim == 0 || self.spatial_dim == 0 {
            return Err(Error::Config("backend feature widths must be positive".into()));
        }
        if self.input_size == 0 || self.clip_len == 0 || self.slow_subsample == 0 {
            return Err(Error::Config(
                "input size, clip length and slow subsample must be positive".into(),
            ));
        }
        if self.slow_subsample > self.clip_len {
            return Err(Error::Config("slow subsample exceeds clip length".into()));
        }
        if self.std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::Config("normalisation std must be positive".into()));
        }
        Ok(())
    }
}

/// Normalised float frames in channel, time, row, column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: usize,
    pub size: usize,
    pub data: Vec<f32>,
}

impl Clip {
    /// Scales to `[0, 1]` then applies per-channel `(x - mean) / std`.
    pub fn from_frames(frames: &[&RgbBuffer], mean: [f32; 3], std: [f32; 3]) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Contract("empty frame stack".into()));
        };
        let size = first.width();
        let plane = size * size;
        let t = frames.len();
        let mut data = vec![0f32; 3 * t * plane];
        for (ti, f) in frames.iter().enumerate() {
            if f.width() != size || f.height() != size {
                return Err(Error::Shape(format!(
                    "stack frame {ti} is {}x{}, expected {size}x{size}",
                    f.width(),
                    f.height()
                )));
            }
            for (i, px) in f.as_bytes().chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[(c * t + ti) * plane + i] = (px[c] as f32 / 255.0 - mean[c]) / std[c];
                }
            }
        }
        Ok(Self {
            frames: t,
            size,
            data,
        })
    }

    pub fn plane(&self, channel: usize, t: usize) -> &[f32] {
        let plane = self.size * self.size;
        let off = (channel * self.frames + t) * plane;
        &self.data[off..off + plane]
    }
}

/// Inference boundary for the motion and spatial backbones.
pub trait FeatureBackend: Send {
    fn id(&self) -> String;
    fn spec(&self) -> &BackendSpec;
    /// Pooled slow-path features followed by pooled fast-path features.
    fn motion(&mut self, slow: &Clip, fast: &Clip) -> Result<Vec<f32>>;
    /// Pooled features of a single-frame clip.
    fn spatial(&mut self, frame: &Clip) -> Result<Vec<f32>>;
}

pub fn open_backend(spec: &BackendSpec) -> Result<Box<dyn FeatureBackend>> {
    spec.validate()?;
    match spec.kind {
        BackendKind::Toy => Ok(Box::new(ToyBackend::new(spec.clone()))),
        #[cfg(feature = "onnx")]
        BackendKind::Neural => {
            let dir = spec
                .model_dir
                .as_ref()
                .ok_or_else(|| Error::Backend("neural backend needs a models directory".into()))?;
            Ok(Box::new(NeuralBackend::load(dir, spec)?))
        }
        #[cfg(not(feature = "onnx"))]
        BackendKind::Neural => Err(Error::Backend(
            "built without the `onnx` feature; only the toy backend is available".into(),
        )),
    }
}

/// Frame indices used to stretch or squeeze `len` frames to `target`.
pub fn resample_indices(len: usize, target: usize) -> Vec<usize> {
    assert!(len > 0);
    let scale = len as f64 / target as f64;
    (0..target)
        .map(|i| (((i as f64 + 0.5) * scale - 0.5).round().max(0.0) as usize).min(len - 1))
        .collect()
}

/// Slow-path frame positions inside a fast clip of `clip_len` frames,
/// `floor(linspace(0, clip_len - 1, clip_len / alpha))`.
pub fn slow_indices(clip_len: usize, alpha: usize) -> Vec<usize> {
    let n = (clip_len / alpha).max(1);
    if n == 1 {
        return vec![0];
    }
    (0..n).map(|i| i * (clip_len - 1) / (n - 1)).collect()
}

fn check_output(what: &str, values: &[f32], expect: usize) -> Result<()> {
    if values.len() != expect {
        return Err(Error::Backend(format!(
            "{what} produced {} values, expected {expect}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

pub fn extract_motion(stack: &[&RgbBuffer], backend: &mut dyn FeatureBackend) -> Result<Vec<f32>> {
    let spec = backend.spec().clone();
    check_stack(stack, &spec)?;
    let fast: Vec<&RgbBuffer> = resample_indices(stack.len(), spec.clip_len)
        .into_iter()
        .map(|i| stack[i])
        .collect();
    let slow: Vec<&RgbBuffer> = slow_indices(spec.clip_len, spec.slow_subsample)
        .into_iter()
        .map(|i| fast[i])
        .collect();
    let fast = Clip::from_frames(&fast, spec.mean, spec.std)?;
    let slow = Clip::from_frames(&slow, spec.mean, spec.std)?;
    let out = backend.motion(&slow, &fast)?;
    check_output("motion branch", &out, spec.motion_dim())?;
    Ok(out)
}

pub fn extract_spatial(stack: &[&RgbBuffer], backend: &mut dyn FeatureBackend) -> Result<Vec<f32>> {
    let spec = backend.spec().clone();
    check_stack(stack, &spec)?;
    let mut acc = vec![0f64; spec.spatial_dim];
    // Padded entries repeat the same frame; reuse its features.
    let mut last: Option<(*const RgbBuffer, Vec<f32>)> = None;
    for &frame in stack {
        let key = frame as *const RgbBuffer;
        let feats = match &last {
            Some((k, v)) if *k == key => v.clone(),
            _ => {
                let clip = Clip::from_frames(&[frame], spec.mean, spec.std)?;
                let v = backend.spatial(&clip)?;
                check_output("spatial branch", &v, spec.spatial_dim)?;
                last = Some((key, v.clone()));
                v
            }
        };
        for (a, v) in acc.iter_mut().zip(&feats) {
            *a += *v as f64;
        }
    }
    let n = stack.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

fn check_stack(stack: &[&RgbBuffer], spec: &BackendSpec) -> Result<()> {
    if stack.is_empty() {
        return Err(Error::Contract("empty frame stack".into()));
    }
    if let Some(bad) = stack
        .iter()
        .find(|f| f.width() != spec.input_size || f.height() != spec.input_size)
    {
        return Err(Error::Shape(format!(
            "backend expects {0}x{0} frames, got {1}x{2}",
            spec.input_size,
            bad.width(),
            bad.height()
        )));
    }
    Ok(())
}

/// The six pooled vectors of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkFeatures {
    pub chunk_index: usize,
    /// Resized, fragmented residual, fragmented frame.
    pub motion: [Vec<f32>; 3],
    pub spatial: [Vec<f32>; 3],
}

impl ChunkFeatures {
    pub fn extract(
        chunk: &crate::chunking::ChunkTriplet,
        backend: &mut dyn FeatureBackend,
    ) -> Result<Self> {
        let stacks = [chunk.resized(), chunk.frag_residuals(), chunk.frag_frames()];
        let mut motion: [Vec<f32>; 3] = Default::default();
        let mut spatial: [Vec<f32>; 3] = Default::default();
        for (k, stack) in stacks.iter().enumerate() {
            motion[k] = extract_motion(stack, backend)?;
            spatial[k] = extract_spatial(stack, backend)?;
        }
        Ok(Self {
            chunk_index: chunk.index,
            motion,
            spatial,
        })
    }
}

/// Concatenates as resized (motion, spatial), residual (motion, spatial),
/// fragment (motion, spatial).
pub fn fuse_chunk(features: &ChunkFeatures) -> Vec<f32> {
    let len: usize = features.motion.iter().chain(&features.spatial).map(Vec::len).sum();
    let mut out = Vec::with_capacity(len);
    for k in 0..3 {
        out.extend_from_slice(&features.motion[k]);
        out.extend_from_slice(&features.spatial[k]);
    }
    out
}

/// Fused vector of one chunk, tagged with its position in the video.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkVector {
    pub chunk_index: usize,
    pub values: Vec<f32>,
}

fn pairwise_sum(items: &[&[f32]], col: usize) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0][col] as f64,
        n => pairwise_sum(&items[..n / 2], col) + pairwise_sum(&items[n / 2..], col),
    }
}

/// Element-wise mean over chunks, reduced in chunk-index order with a fixed
/// pairwise tree so the result does not depend on completion order.
pub fn aggregate_video(chunks: &[ChunkVector]) -> Result<Vec<f32>> {
    if chunks.is_empty() {
        return Err(Error::EmptyVideo);
    }
    let mut ordered: Vec<&ChunkVector> = chunks.iter().collect();
    ordered.sort_by_key(|c| c.chunk_index);
    let dim = ordered[0].values.len();
    if ordered.iter().any(|c| c.values.len() != dim) {
        return Err(Error::Shape("chunk vectors differ in length".into()));
    }
    let rows: Vec<&[f32]> = ordered.iter().map(|c| c.values.as_slice()).collect();
    let n = rows.len() as f64;
    let out: Vec<f32> = (0..dim).map(|j| (pairwise_sum(&rows, j) / n) as f32).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("video feature".into()));
    }
    Ok(out)
}

/// Per-video feature vector with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeature {
    pub values: Vec<f32>,
    pub backend_id: String,
    pub config_hash: String,
    pub chunk_count: usize,
}

impl VideoFeature {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}
