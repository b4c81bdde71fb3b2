//! End-to-end composition: frames → triplets → chunks → features → scores.

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::chunking::{chunk_triplets, ChunkStream, ChunkTriplet};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{aggregate_video, fuse_chunk, ChunkFeatures, ChunkVector, FeatureBackend, VideoFeature};
use crate::fragmentation::{fragment_pair, FragConfig, FragmentTriplet};
use crate::frame_io::{open_video, Frame, VideoMeta};
use crate::metrics::{self, EvalResult, RepeatedEval};
use crate::regressor::{self, select_rows, split_indices, MlpModel, TrainConfig};

/// Reads every frame of a video into memory.
pub fn decode_all(path: &Path) -> Result<(VideoMeta, Vec<Frame>)> {
    let (meta, stream) = open_video(path)?;
    let frames = stream.collect::<Result<Vec<_>>>()?;
    Ok((meta, frames))
}

/// Triplets for every consecutive frame pair; frame 0 yields none.
pub fn fragment_all(frames: &[Frame], cfg: &FragConfig) -> Result<Vec<FragmentTriplet>> {
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        frames
            .par_windows(2)
            .map(|w| fragment_pair(&w[0], &w[1], cfg))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        frames
            .windows(2)
            .map(|w| fragment_pair(&w[0], &w[1], cfg))
            .collect()
    }
}

fn chunk_vector(chunk: &ChunkTriplet, backend: &mut dyn FeatureBackend) -> Result<ChunkVector> {
    let features = ChunkFeatures::extract(chunk, backend)?;
    Ok(ChunkVector {
        chunk_index: chunk.index,
        values: fuse_chunk(&features),
    })
}

/// Features for already-built chunks.
pub fn extract_chunks(
    chunks: &[ChunkTriplet],
    backend: &mut dyn FeatureBackend,
    config_hash: &str,
) -> Result<VideoFeature> {
    let vectors = chunks
        .iter()
        .map(|c| chunk_vector(c, backend))
        .collect::<Result<Vec<_>>>()?;
    finish_feature(&vectors, backend, config_hash)
}

fn finish_feature(
    vectors: &[ChunkVector],
    backend: &dyn FeatureBackend,
    config_hash: &str,
) -> Result<VideoFeature> {
    let values = aggregate_video(vectors)?;
    let expected = backend.spec().fused_dim();
    if values.len() != expected {
        return Err(Error::Backend(format!(
            "fused feature has {} values, backend declares {expected}",
            values.len()
        )));
    }
    Ok(VideoFeature {
        values,
        backend_id: backend.id(),
        config_hash: config_hash.into(),
        chunk_count: vectors.len(),
    })
}

/// Features for in-memory frames.
pub fn extract_frames(
    frames: &[Frame],
    meta: &VideoMeta,
    cfg: &PipelineConfig,
    backend: &mut dyn FeatureBackend,
) -> Result<VideoFeature> {
    let triplets = fragment_all(frames, &cfg.frag)?;
    let chunks = chunk_triplets(triplets, meta, &cfg.chunk)?;
    extract_chunks(&chunks, backend, &cfg.feature_hash())
}

/// Features for a frame stream, holding at most one chunk of triplets.
pub fn extract_stream<I>(
    meta: &VideoMeta,
    frames: I,
    cfg: &PipelineConfig,
    backend: &mut dyn FeatureBackend,
) -> Result<VideoFeature>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    cfg.validate()?;
    let mut stream = ChunkStream::new(meta, &cfg.chunk)?;
    let mut vectors = Vec::new();
    let mut prev: Option<Frame> = None;
    for frame in frames {
        let frame = frame?;
        if let Some(p) = &prev {
            let triplet = fragment_pair(p, &frame, &cfg.frag)?;
            if let Some(chunk) = stream.push(triplet) {
                vectors.push(chunk_vector(&chunk, backend)?);
            }
        }
        prev = Some(frame);
    }
    for chunk in stream.finish()? {
        vectors.push(chunk_vector(&chunk, backend)?);
    }
    finish_feature(&vectors, backend, &cfg.feature_hash())
}

/// Opens a video file and extracts its features.
pub fn extract_path(path: &Path, cfg: &PipelineConfig, backend: &mut dyn FeatureBackend) -> Result<VideoFeature> {
    let (meta, stream) = open_video(path)?;
    extract_stream(&meta, stream, cfg, backend)
}

/// Stacks equal-length feature vectors into a matrix.
pub fn feature_matrix(rows: &[&[f32]]) -> Result<Array2<f32>> {
    let dim = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("feature vectors differ in length".into()));
    }
    let flat: Vec<f32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Ok(Array2::from_shape_vec((rows.len(), dim), flat).expect("sizes checked"))
}

/// One repeat: seeded train/test split, fit on the training part (which
/// holds out its own validation set), score the test part.
pub fn eval_once(
    features: ArrayView2<'_, f32>,
    labels: &[f64],
    train_cfg: &TrainConfig,
    train_fraction: f64,
    repeat_index: usize,
) -> Result<EvalResult> {
    let seed = train_cfg.seed.wrapping_add(repeat_index as u64);
    let (train_idx, test_idx) = split_indices(features.nrows(), train_fraction, seed);
    if test_idx.len() < 2 {
        return Err(Error::Config(format!(
            "{} videos leave fewer than 2 for testing",
            features.nrows()
        )));
    }
    let x_train = select_rows(features, &train_idx);
    let y_train: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();
    let cfg = TrainConfig { seed, ..train_cfg.clone() };
    let outcome = regressor::train(x_train.view(), &y_train, &cfg)?;
    let x_test = select_rows(features, &test_idx);
    let y_test: Vec<f64> = test_idx.iter().map(|&i| labels[i]).collect();
    let pred = outcome.model.forward_eval(x_test.view())?;
    EvalResult::compute(&pred, &y_test, repeat_index)
}

/// Median metrics over `cfg.eval.repeats` independent repeats.
pub fn repeated_eval(features: ArrayView2<'_, f32>, labels: &[f64], cfg: &PipelineConfig) -> Result<RepeatedEval> {
    cfg.validate()?;
    if labels.len() != features.nrows() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    metrics::repeated(cfg.eval.repeats, |r| {
        eval_once(features, labels, &cfg.train, cfg.eval.train_fraction, r)
    })
}

/// Scores every row.
pub fn predict_rows(model: &MlpModel, features: ArrayView2<'_, f32>) -> Result<Vec<f64>> {
    regressor::predict_batch(model, features)
}

/// `video_id,score` rows with a header, in the given order.
pub fn scores_csv(ids: &[String], scores: &[f64]) -> Result<String> {
    if ids.len() != scores.len() {
        return Err(Error::Shape("ids and scores differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["video_id", "score"]).map_err(|e| Error::Format(e.to_string()))?;
    for (id, s) in ids.iter().zip(scores) {
        w.write_record([id.as_str(), &format!("{s:.6}")])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 input"))
}

/// Reads a `video_id,mos` CSV with one header row.
pub fn read_labels(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(file)
}

pub fn parse_labels<R: std::io::Read>(input: R) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "video_id" || &headers[1] != "mos" {
        return Err(Error::Format("labels CSV header must be `video_id,mos`".into()));
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let id = record[0].to_string();
        let mos: f64 = record[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::Format(format!("labels row {}: bad mos `{}`", line + 2, &record[1])))?;
        if !seen.insert(id.clone()) {
            return Err(Error::Format(format!("labels row {}: duplicate id `{id}`", line + 2)));
        }
        out.push((id, mos));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{open_backend, BackendSpec};
    use crate::synth::{synth_meta, SynthClip, SynthParams};

    fn small_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.frag.target_size = 32;
        cfg.frag.patch_size = 8;
        cfg.backend = BackendSpec {
            input_size: 32,
            clip_len: 8,
            ..BackendSpec::base()
        };
        cfg
    }

    #[test]
    fn stream_equals_batch() {
        let cfg = small_cfg();
        let frames = SynthClip::new(SynthParams::default()).frames(48, 40, 23, 8);
        let meta = synth_meta(48, 40, 23, 8);
        let mut backend = open_backend(&cfg.backend).unwrap();
        let a = extract_frames(&frames, &meta, &cfg, backend.as_mut()).unwrap();
        let b = extract_stream(&meta, frames.into_iter().map(Ok), &cfg, backend.as_mut()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.chunk_count, 2);
        assert_eq!(a.dim(), 9984);
    }

    #[test]
    fn single_frame_is_empty() {
        let cfg = small_cfg();
        let frames = SynthClip::new(SynthParams::default()).frames(48, 40, 1, 8);
        let meta = synth_meta(48, 40, 1, 8);
        let mut backend = open_backend(&cfg.backend).unwrap();
        assert!(matches!(
            extract_frames(&frames, &meta, &cfg, backend.as_mut()),
            Err(Error::EmptyVideo)
        ));
    }

    #[test]
    fn labels_parse() {
        let rows = parse_labels(&b"video_id,mos\na, 3.5\nb,1\n"[..]).unwrap();
        assert_eq!(rows, [("a".to_string(), 3.5), ("b".to_string(), 1.0)]);
        assert!(parse_labels(&b"id,score\na,1\n"[..]).is_err());
        assert!(parse_labels(&b"video_id,mos\na,x\n"[..]).is_err());
        assert!(parse_labels(&b"video_id,mos\na,1\na,2\n"[..]).is_err());
    }

    #[test]
    fn scores_csv_layout() {
        let csv = scores_csv(&["a".into(), "b,c".into()], &[1.0, 2.25]).unwrap();
        assert_eq!(csv, "video_id,score\na,1.000000\n\"b,c\",2.250000\n");
    }

    #[test]
    fn feature_matrix_rejects_ragged() {
        assert!(feature_matrix(&[&[1.0, 2.0], &[3.0]]).is_err());
        assert_eq!(feature_matrix(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap().dim(), (2, 2));
    }
}
