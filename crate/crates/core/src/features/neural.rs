//! ONNX backbones run through `tract`.
//!
//! A models directory holds `manifest.json`:
//!
//! ```json
//! {"motion_model": "slowfast.onnx", "spatial_model": "swin_base.onnx",
//!  "spatial_dim": 1024, "clip_len": 32, "mean": [0.45, 0.45, 0.45],
//!  "std": [0.225, 0.225, 0.225], "slow_subsample": 4}
//! ```
//!
//! The motion graph takes either one input (the `[1,3,T,s,s]` fast clip) or
//! two (slow clip, then fast clip). It may emit one output holding the
//! concatenated features or two (slow, fast). The spatial graph takes one
//! `[1,3,s,s]` frame. Any output of rank above two is global-average pooled
//! over every axis after the channel axis.

use std::path::Path;

use serde::Deserialize;
use tract_onnx::prelude::*;

use super::{BackendSpec, Clip, FeatureBackend};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModelManifest {
    pub motion_model: String,
    pub spatial_model: String,
    pub spatial_dim: usize,
    pub clip_len: usize,
    pub mean: [f32; 3],
    pub std: [f32; 3],
    pub slow_subsample: usize,
}

impl ModelManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let bytes = std::fs::read(&path).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Backend(format!("{}: {e}", path.display())))
    }
}

type Plan = std::sync::Arc<TypedSimplePlan>;

pub struct NeuralBackend {
    spec: BackendSpec,
    motion: Plan,
    motion_inputs: usize,
    spatial: Plan,
    id: String,
}

fn backend_err(what: &str) -> impl Fn(TractError) -> Error + '_ {
    move |e| Error::Backend(format!("{what}: {e:#}"))
}

fn load_plan(path: &Path, inputs: &[Vec<usize>]) -> Result<(Plan, usize)> {
    let what = path.display().to_string();
    if !path.is_file() {
        return Err(Error::Backend(format!("model file {what} not found")));
    }
    let mut model = tract_onnx::onnx()
        .model_for_path(path)
        .map_err(backend_err(&what))?;
    let declared = model.input_outlets().map_err(backend_err(&what))?.len();
    if declared == 0 || declared > inputs.len() {
        return Err(Error::Backend(format!(
            "{what}: graph has {declared} inputs, expected 1..={}",
            inputs.len()
        )));
    }
    // A single-input motion graph receives only the fast clip.
    let shapes = &inputs[inputs.len() - declared..];
    for (i, shape) in shapes.iter().enumerate() {
        model = model
            .with_input_fact(i, f32::fact(shape.clone()).into())
            .map_err(|e| {
                Error::Backend(format!("{what}: input {i} rejects shape {shape:?}: {e:#}"))
            })?;
    }
    let plan = model
        .into_optimized()
        .and_then(|m| m.into_runnable())
        .map_err(backend_err(&what))?;
    Ok((plan, declared))
}

fn clip_tensor(clip: &Clip, with_time: bool) -> Result<Tensor> {
    let s = clip.size;
    let shape: Vec<usize> = if with_time {
        vec![1, 3, clip.frames, s, s]
    } else {
        vec![1, 3, s, s]
    };
    Tensor::from_shape(&shape, &clip.data).map_err(backend_err("input tensor"))
}

/// Global average pool over all axes after the channel axis.
fn pool(value: &TValue, what: &str) -> Result<Vec<f32>> {
    let view = value
        .to_plain_array_view::<f32>()
        .map_err(|e| Error::Backend(format!("{what}: output is not f32: {e:#}")))?;
    let shape = view.shape().to_vec();
    match shape.len() {
        1 => Ok(view.iter().copied().collect()),
        2 if shape[0] == 1 => Ok(view.iter().copied().collect()),
        n if n >= 3 && shape[0] == 1 => {
            let channels = shape[1];
            let per: usize = shape[2..].iter().product();
            let flat: Vec<f32> = view.iter().copied().collect();
            Ok((0..channels)
                .map(|c| {
                    let sum: f64 = flat[c * per..(c + 1) * per].iter().map(|&v| v as f64).sum();
                    (sum / per as f64) as f32
                })
                .collect())
        }
        _ => Err(Error::Backend(format!("{what}: unexpected output shape {shape:?}"))),
    }
}

impl NeuralBackend {
    /// Loads both graphs. Manifest values override the geometry in `spec`.
    pub fn load(dir: &Path, spec: &BackendSpec) -> Result<Self> {
        let manifest = ModelManifest::load(dir)?;
        let spec = BackendSpec {
            spatial_dim: manifest.spatial_dim,
            clip_len: manifest.clip_len,
            slow_subsample: manifest.slow_subsample,
            mean: manifest.mean,
            std: manifest.std,
            ..spec.clone()
        };
        spec.validate()?;
        let s = spec.input_size;
        let slow_len = super::slow_indices(spec.clip_len, spec.slow_subsample).len();
        let (motion, motion_inputs) = load_plan(
            &dir.join(&manifest.motion_model),
            &[vec![1, 3, slow_len, s, s], vec![1, 3, spec.clip_len, s, s]],
        )?;
        let (spatial, _) = load_plan(&dir.join(&manifest.spatial_model), &[vec![1, 3, s, s]])?;
        Ok(Self {
            id: format!("onnx:{}+{}", manifest.motion_model, manifest.spatial_model),
            spec,
            motion,
            motion_inputs,
            spatial,
        })
    }
}

impl FeatureBackend for NeuralBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    fn motion(&mut self, slow: &Clip, fast: &Clip) -> Result<Vec<f32>> {
        let inputs: TVec<TValue> = if self.motion_inputs == 2 {
            tvec!(clip_tensor(slow, true)?.into(), clip_tensor(fast, true)?.into())
        } else {
            tvec!(clip_tensor(fast, true)?.into())
        };
        let outputs = self.motion.run(inputs).map_err(backend_err("motion graph"))?;
        let mut out = Vec::with_capacity(self.spec.motion_dim());
        for (k, o) in outputs.iter().enumerate() {
            let pooled = pool(o, "motion graph")?;
            if outputs.len() == 2 {
                let want = if k == 0 { self.spec.slow_dim } else { self.spec.fast_dim };
                if pooled.len() != want {
                    return Err(Error::Backend(format!(
                        "motion output {k} has {} channels, expected {want} (shape {:?})",
                        pooled.len(),
                        o.shape()
                    )));
                }
            }
            out.extend(pooled);
        }
        Ok(out)
    }

    fn spatial(&mut self, frame: &Clip) -> Result<Vec<f32>> {
        let outputs = self
            .spatial
            .run(tvec!(clip_tensor(frame, false)?.into()))
            .map_err(backend_err("spatial graph"))?;
        let first = outputs
            .first()
            .ok_or_else(|| Error::Backend("spatial graph has no outputs".into()))?;
        pool(first, "spatial graph")
    }
}
