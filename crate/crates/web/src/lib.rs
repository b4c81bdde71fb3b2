//! WebAssembly bindings for the demo page in `www/`.
//!
//! Three operations: fragment one frame pair of a synthetic clip, tabulate
//! the learning-rate schedule, and run a small training job on toy
//! features. The plain Rust functions are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert types.

use fragvqa_core::config::PipelineConfig;
use fragvqa_core::features::{open_backend, BackendSpec};
use fragvqa_core::fragmentation::{compute_residual, fragment_pair, FragConfig};
use fragvqa_core::frame_io::Frame;
use fragvqa_core::metrics::{plcc, srcc};
use fragvqa_core::pipeline::{extract_frames, feature_matrix};
use fragvqa_core::regressor::{select_rows, train, TrainConfig};
use fragvqa_core::synth::{synth_meta, SynthClip, SynthParams};
use fragvqa_core::RgbBuffer;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_rgba(image: &RgbBuffer, gain: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.width() * image.height() * 4);
    for px in image.as_bytes().chunks_exact(3) {
        for &c in px {
            out.push((c as u32 * gain).min(255) as u8);
        }
        out.push(255);
    }
    out
}

/// Everything the page draws for one frame pair.
#[wasm_bindgen]
pub struct FragmentView {
    width: usize,
    height: usize,
    size: usize,
    patch: usize,
    frame: Vec<u8>,
    residual: Vec<u8>,
    resized: Vec<u8>,
    frag_residual: Vec<u8>,
    frag_frame: Vec<u8>,
    coords: Vec<u32>,
}

#[wasm_bindgen]
impl FragmentView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }
    #[wasm_bindgen(getter)]
    pub fn patch(&self) -> usize {
        self.patch
    }
    /// Current frame, RGBA.
    pub fn frame(&self) -> Vec<u8> {
        self.frame.clone()
    }
    /// Residual amplified ×4 for display, RGBA.
    pub fn residual(&self) -> Vec<u8> {
        self.residual.clone()
    }
    pub fn resized(&self) -> Vec<u8> {
        self.resized.clone()
    }
    /// Fragmented residual, amplified ×4, RGBA.
    pub fn frag_residual(&self) -> Vec<u8> {
        self.frag_residual.clone()
    }
    pub fn frag_frame(&self) -> Vec<u8> {
        self.frag_frame.clone()
    }
    /// Selected patches as flat `(row, col)` pairs in rank order.
    pub fn coords(&self) -> Vec<u32> {
        self.coords.clone()
    }
}

pub struct ClipSettings {
    pub seed: u64,
    pub shapes: usize,
    pub speed: f64,
    pub noise: f64,
}

pub fn fragment_view(
    clip: &ClipSettings,
    width: usize,
    height: usize,
    frame_index: usize,
    fps: u32,
    patch: usize,
    size: usize,
) -> Result<FragmentView, String> {
    let synth = SynthClip::new(SynthParams {
        seed: clip.seed,
        shapes: clip.shapes,
        speed: clip.speed,
        noise: clip.noise,
        blockiness: 0.0,
    });
    let t = |i: usize| i as f64 / fps.max(1) as f64;
    let i = frame_index.max(1);
    let prev = Frame::from_image(i as u64 - 1, synth.render(width, height, t(i - 1)));
    let cur = Frame::from_image(i as u64, synth.render(width, height, t(i)));
    let cfg = FragConfig {
        patch_size: patch,
        target_size: size,
        ..FragConfig::default()
    };
    let triplet = fragment_pair(&prev, &cur, &cfg).map_err(|e| e.to_string())?;
    let residual = compute_residual(&cur, &prev).map_err(|e| e.to_string())?;
    Ok(FragmentView {
        width,
        height,
        size,
        patch,
        frame: to_rgba(cur.image(), 1),
        residual: to_rgba(&residual.image, 4),
        resized: to_rgba(&triplet.resized_frame, 1),
        frag_residual: to_rgba(&triplet.frag_residual, 4),
        frag_frame: to_rgba(&triplet.frag_frame, 1),
        coords: triplet
            .coords
            .iter()
            .flat_map(|c| [c.row as u32, c.col as u32])
            .collect(),
    })
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn fragment_synthetic(
    seed: u32,
    shapes: usize,
    speed: f64,
    noise: f64,
    width: usize,
    height: usize,
    frame_index: usize,
    patch: usize,
    size: usize,
) -> Result<FragmentView, JsError> {
    let clip = ClipSettings {
        seed: seed as u64,
        shapes,
        speed,
        noise,
    };
    fragment_view(&clip, width, height, frame_index, 8, patch, size).map_err(|e| JsError::new(&e))
}

/// Learning rate of every epoch: cosine decay, held at `lr0` during SWA.
pub fn lr_schedule(lr0: f64, epochs: usize, swa_start_frac: f64) -> Vec<f64> {
    let cfg = TrainConfig {
        lr0,
        epochs,
        swa_start_frac,
        ..TrainConfig::fine_tune()
    };
    (0..epochs).map(|e| cfg.lr_at(e)).collect()
}

#[wasm_bindgen]
pub fn lr_curve(lr0: f64, epochs: usize, swa_start_frac: f64) -> Vec<f64> {
    lr_schedule(lr0, epochs, swa_start_frac.clamp(0.0, 1.0))
}

#[derive(Debug, Serialize)]
pub struct TrainDemo {
    pub dim: usize,
    pub epochs: Vec<(usize, f64, f64, f64)>,
    pub selected: String,
    /// `(label, prediction, is_validation)` per video.
    pub points: Vec<(f64, f64, bool)>,
    pub val_srcc: f64,
    pub val_plcc: f64,
}

/// Trains on toy features of `videos` synthetic clips whose label is a
/// made-up quality score that drops with noise and blockiness.
pub fn train_demo_run(videos: usize, epochs: usize, seed: u64) -> Result<TrainDemo, String> {
    let err = |e: fragvqa_core::Error| e.to_string();
    let mut cfg = PipelineConfig::default();
    cfg.frag = FragConfig {
        patch_size: 8,
        target_size: 32,
        ..FragConfig::default()
    };
    cfg.backend = BackendSpec {
        input_size: 32,
        clip_len: 8,
        slow_dim: 48,
        fast_dim: 24,
        spatial_dim: 24,
        ..BackendSpec::base()
    };
    let mut backend = open_backend(&cfg.backend).map_err(err)?;
    let mut feats = Vec::with_capacity(videos);
    let mut labels = Vec::with_capacity(videos);
    for v in 0..videos {
        let k = seed.wrapping_mul(1000).wrapping_add(v as u64);
        let noise = (k % 7) as f64 * 6.0;
        let blockiness = (k / 7 % 4) as f64 * 0.04;
        let clip = SynthClip::new(SynthParams {
            seed: k,
            shapes: 1 + (k % 5) as usize,
            speed: 0.1 + (k % 3) as f64 * 0.2,
            noise,
            blockiness,
        });
        let frames = clip.frames(64, 48, 9, 8);
        let f = extract_frames(&frames, &synth_meta(64, 48, 9, 8), &cfg, backend.as_mut()).map_err(err)?;
        feats.push(f.values);
        labels.push(5.0 - noise / 12.0 - blockiness * 15.0);
    }
    let rows: Vec<&[f32]> = feats.iter().map(Vec::as_slice).collect();
    let x = feature_matrix(&rows).map_err(err)?;
    let train_cfg = TrainConfig {
        epochs,
        seed,
        hidden: (32, 16),
        batch_size: 16,
        ..TrainConfig::fine_tune()
    };
    let out = train(x.view(), &labels, &train_cfg).map_err(err)?;
    let pred = out.model.forward_eval(x.view()).map_err(err)?;
    let mut is_val = vec![false; videos];
    for &i in &out.val_indices {
        is_val[i] = true;
    }
    let xv = select_rows(x.view(), &out.val_indices);
    let pv = out.model.forward_eval(xv.view()).map_err(err)?;
    let yv: Vec<f64> = out.val_indices.iter().map(|&i| labels[i]).collect();
    Ok(TrainDemo {
        dim: x.ncols(),
        epochs: out
            .log
            .epochs
            .iter()
            .map(|e| (e.epoch, e.lr, e.train_loss, e.val_rmse))
            .collect(),
        selected: format!("{:?}", out.log.selected),
        points: labels
            .iter()
            .zip(&pred)
            .zip(&is_val)
            .map(|((&y, &p), &v)| (y, p, v))
            .collect(),
        val_srcc: srcc(&pv, &yv).unwrap_or(f64::NAN),
        val_plcc: plcc(&pv, &yv).unwrap_or(f64::NAN),
    })
}

/// JSON form of [`train_demo_run`].
#[wasm_bindgen]
pub fn train_demo(videos: usize, epochs: usize, seed: u32) -> Result<String, JsError> {
    let run = train_demo_run(videos, epochs, seed as u64).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&run).map_err(|e| JsError::new(&e.to_string()))
}
