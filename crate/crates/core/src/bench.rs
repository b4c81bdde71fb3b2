//! Per-stage wall-clock timing over repeated runs.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chunking::chunk_triplets;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::features::{open_backend, FeatureBackend};
use crate::pipeline::{decode_all, extract_chunks, fragment_all};
use crate::regressor::{predict, MlpModel};

pub const DEFAULT_BENCH_REPEATS: usize = 10;

pub const STAGES: [&str; 4] = ["decode", "fragment", "extract", "predict"];

/// Seconds spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub decode: f64,
    pub fragment: f64,
    pub extract: f64,
    pub predict: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.decode + self.fragment + self.extract + self.predict
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        match stage {
            "decode" => Some(self.decode),
            "fragment" => Some(self.fragment),
            "extract" => Some(self.extract),
            "predict" => Some(self.predict),
            _ => None,
        }
    }

    fn add(&mut self, o: &StageTimes) {
        self.decode += o.decode;
        self.fragment += o.fragment;
        self.extract += o.extract;
        self.predict += o.predict;
    }

    fn scale(&mut self, k: f64) {
        self.decode *= k;
        self.fragment *= k;
        self.extract *= k;
        self.predict *= k;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub video: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub repeats: usize,
    pub mean: StageTimes,
    pub end_to_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub backend: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>11} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "video", "resolution", "decode", "fragment", "extract", "predict", "total"
        );
        for r in &self.rows {
            let res = format!("{}x{}", r.width, r.height);
            out.push_str(&format!(
                "{:<24} {:>11} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                r.video, res, r.mean.decode, r.mean.fragment, r.mean.extract, r.mean.predict, r.end_to_end
            ));
        }
        out
    }
}

fn run_once(
    path: &std::path::Path,
    cfg: &PipelineConfig,
    backend: &mut dyn FeatureBackend,
    model: &MlpModel,
) -> Result<(StageTimes, usize, usize, usize)> {
    let t = Instant::now();
    let (meta, frames) = decode_all(path)?;
    let decode = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let triplets = fragment_all(&frames, &cfg.frag)?;
    let fragment = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let chunks = chunk_triplets(triplets, &meta, &cfg.chunk)?;
    let feature = extract_chunks(&chunks, backend, &cfg.feature_hash())?;
    let extract = t.elapsed().as_secs_f64();

    let t = Instant::now();
    std::hint::black_box(predict(model, &feature.values)?);
    let predict = t.elapsed().as_secs_f64();

    let times = StageTimes {
        decode,
        fragment,
        extract,
        predict,
    };
    Ok((times, meta.width, meta.height, frames.len()))
}

/// Runs every video once untimed, then `repeats` timed runs, and reports the
/// mean of each stage. `model` defaults to a seeded random regressor of the
/// right width.
pub fn run_bench(
    videos: &[PathBuf],
    cfg: &PipelineConfig,
    model: Option<&MlpModel>,
    repeats: usize,
) -> Result<BenchReport> {
    cfg.validate()?;
    let repeats = repeats.max(1);
    let mut backend = open_backend(&cfg.backend)?;
    let fallback;
    let model = match model {
        Some(m) => m,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            fallback = MlpModel::init(cfg.backend.fused_dim(), cfg.train.hidden, 0.0, &mut rng);
            &fallback
        }
    };
    let mut rows = Vec::with_capacity(videos.len());
    for path in videos {
        let (_, width, height, frames) = run_once(path, cfg, backend.as_mut(), model)?;
        let mut sum = StageTimes::default();
        for _ in 0..repeats {
            let (t, ..) = run_once(path, cfg, backend.as_mut(), model)?;
            sum.add(&t);
        }
        sum.scale(1.0 / repeats as f64);
        rows.push(BenchRow {
            video: path.display().to_string(),
            width,
            height,
            frames,
            repeats,
            mean: sum,
            end_to_end: sum.total(),
        });
    }
    Ok(BenchReport {
        backend: backend.id(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::{write_y4m, Rational};
    use crate::synth::{SynthClip, SynthParams};

    #[test]
    fn report_has_four_stages_per_video() {
        let dir = tempfile::tempdir().unwrap();
        let clip = SynthClip::new(SynthParams::default());
        let mut paths = Vec::new();
        for (w, h) in [(64, 36), (128, 72)] {
            let path = dir.path().join(format!("{w}.y4m"));
            let file = std::fs::File::create(&path).unwrap();
            write_y4m(file, Rational::new(4, 1).unwrap(), &clip.frames(w, h, 5, 4)).unwrap();
            paths.push(path);
        }
        let mut cfg = PipelineConfig::default();
        cfg.frag.target_size = 32;
        cfg.backend.input_size = 32;
        cfg.backend.clip_len = 8;
        cfg.train.hidden = (8, 4);
        let report = run_bench(&paths, &cfg, None, 2).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!((report.rows[1].width, report.rows[1].height), (128, 72));
        for row in &report.rows {
            for stage in STAGES {
                assert!(row.mean.get(stage).unwrap() >= 0.0);
            }
            assert_eq!(row.repeats, 2);
            assert_eq!(row.frames, 5);
        }
        assert_eq!(report.to_table().lines().count(), 3);
    }
}
