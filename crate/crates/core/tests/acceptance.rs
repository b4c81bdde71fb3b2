//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fragvqa_core::bench::run_bench;
use fragvqa_core::chunking::{chunk_triplets, ChunkConfig};
use fragvqa_core::config::PipelineConfig;
use fragvqa_core::features::{open_backend, BackendSpec, DvqfFile};
use fragvqa_core::fragmentation::{
    compute_residual, fragment_pair, patch_scores, select_top_patches, top_t_count, FragConfig,
    PatchCoord,
};
use fragvqa_core::frame_io::{write_y4m, Frame, Rational, VideoMeta};
use fragvqa_core::metrics::{krcc, plcc, rmse, srcc};
use fragvqa_core::pipeline::{extract_frames, extract_path, feature_matrix, predict_rows, scores_csv};
use fragvqa_core::regressor::{
    composite_grad, composite_loss, load_checkpoint, rank_loss, save_checkpoint, select_rows,
    train, LossWeights, MlpModel, TrainConfig,
};
use fragvqa_core::synth::{synth_meta, SynthClip, SynthParams};
use fragvqa_core::RgbBuffer;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(
        elapsed <= limit,
        format!("took {:.2}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize, levels: u8) -> RgbBuffer {
    let data = (0..w * h * 3).map(|_| rng.random_range(0..levels)).collect();
    RgbBuffer::new(w, h, data).unwrap()
}

/// Frames whose values are drawn per 4×4 block from a few levels, so many
/// patch scores tie.
fn blocky_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbBuffer {
    let bw = w.div_ceil(4);
    let blocks: Vec<u8> = (0..bw * h.div_ceil(4)).map(|_| rng.random_range(0..3) * 40).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let v = blocks[(y / 4) * bw + x / 4];
            data.extend_from_slice(&[v, v, v]);
        }
    }
    RgbBuffer::new(w, h, data).unwrap()
}

fn eq3_law() -> Check {
    let start = Instant::now();
    let mut pairs = 0u64;
    for s in 1..=512usize {
        for p in 1..=s {
            // Smallest T whose patches cover s² pixels, by counting up.
            let mut t = 0;
            while t * p * p < s * s {
                t += 1;
            }
            let got = top_t_count(s, p);
            ensure(got == t, format!("s={s} p={p}: {got} vs brute force {t}"))?;
            pairs += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{pairs} (s, p) pairs exact"))
}

fn oracle_scores(a: &RgbBuffer, b: &RgbBuffer, p: usize) -> Vec<(u64, usize, usize)> {
    let (rows, cols) = (a.height() / p, a.width() / p);
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0u64;
            for y in r * p..(r + 1) * p {
                for x in c * p..(c + 1) * p {
                    let (pa, pb) = (a.pixel(x, y), b.pixel(x, y));
                    for k in 0..3 {
                        sum += (pa[k] as i64 - pb[k] as i64).unsigned_abs();
                    }
                }
            }
            out.push((sum, r, c));
        }
    }
    out
}

fn fragmentation_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = Vec::new();
    for i in 0..200 {
        let w = rng.random_range(33..=512);
        let h = rng.random_range(47..=512);
        let p = [8, 16, 32][i % 3];
        cases.push((w, h, p, i % 2 == 0, rng.random::<u64>()));
    }
    // The smallest sizes in the range are pinned so tiny grids are covered.
    cases[0].0 = 33;
    cases[0].1 = 47;
    cases[0].2 = 32;
    cases[1] = (512, 512, 16, false, 5);
    let results: Vec<Result<(), String>> = cases
        .par_iter()
        .map(|&(w, h, p, ties, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = if ties {
                (blocky_frame(&mut rng, w, h), blocky_frame(&mut rng, w, h))
            } else {
                (random_frame(&mut rng, w, h, 255), random_frame(&mut rng, w, h, 255))
            };
            let prev = Frame::from_image(0, a.clone());
            let cur = Frame::from_image(1, b.clone());
            let residual = compute_residual(&cur, &prev).map_err(|e| e.to_string())?;
            let grid = patch_scores(&residual.image, p).map_err(|e| e.to_string())?;
            let mut oracle = oracle_scores(&b, &a, p);
            ensure(grid.scores.len() == oracle.len(), format!("{w}x{h} p={p}: grid size"))?;
            for (s, &(score, r, c)) in grid.scores.iter().zip(&oracle) {
                ensure(
                    s.score == score && s.coord == PatchCoord::new(r, c),
                    format!("{w}x{h} p={p}: score at ({r},{c})"),
                )?;
            }
            let t = top_t_count(224, p);
            let got = select_top_patches(&grid, t).map_err(|e| e.to_string())?;
            // Full sort by (score desc, row, col), repeated to length T.
            oracle.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            let want: Vec<PatchCoord> = (0..t)
                .map(|k| {
                    let (_, r, c) = oracle[k % oracle.len()];
                    PatchCoord::new(r, c)
                })
                .collect();
            ensure(got == want, format!("{w}x{h} p={p}: top-T selection differs"))
        })
        .collect();
    for r in results {
        r?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{} frame pairs, scores and selections exact", cases.len()))
}

fn alignment_invariant() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut slots = 0usize;
    for i in 0..100 {
        let w = rng.random_range(40..=300);
        let h = rng.random_range(40..=300);
        let p = [8, 16, 32, 12][i % 4];
        let s = if i % 5 == 0 { 100 } else { 224 };
        let a = random_frame(&mut rng, w, h, 255);
        let b = random_frame(&mut rng, w, h, 255);
        let cfg = FragConfig {
            patch_size: p,
            target_size: s,
            ..FragConfig::default()
        };
        let prev = Frame::from_image(3, a.clone());
        let cur = Frame::from_image(4, b.clone());
        let t = fragment_pair(&prev, &cur, &cfg).map_err(|e| e.to_string())?;
        let residual = compute_residual(&cur, &prev).map_err(|e| e.to_string())?.image;
        let per_row = s.div_ceil(p);
        for slot in 0..per_row * per_row {
            let coord = t.coords[slot % t.coords.len()];
            let (dy, dx) = ((slot / per_row) * p, (slot % per_row) * p);
            for y in 0..p.min(s - dy) {
                for x in 0..p.min(s - dx) {
                    let (sx, sy) = (coord.col * p + x, coord.row * p + y);
                    ensure(
                        t.frag_frame.pixel(dx + x, dy + y) == b.pixel(sx, sy),
                        format!("triplet {i}: frame slot {slot} pixel ({x},{y})"),
                    )?;
                    ensure(
                        t.frag_residual.pixel(dx + x, dy + y) == residual.pixel(sx, sy),
                        format!("triplet {i}: residual slot {slot} pixel ({x},{y})"),
                    )?;
                }
            }
            slots += 1;
        }
    }
    Ok(format!("100 triplets, {slots} slots bit-exact"))
}

fn dimension_law() -> Check {
    let clip = SynthClip::new(SynthParams::default());
    let frames = clip.frames(96, 64, 9, 8);
    let meta = synth_meta(96, 64, 9, 8);
    let mut dims = Vec::new();
    for (spec, want) in [(BackendSpec::base(), 9984), (BackendSpec::large(), 11520)] {
        let cfg = PipelineConfig {
            backend: spec,
            ..PipelineConfig::default()
        };
        let mut backend = open_backend(&cfg.backend).map_err(|e| e.to_string())?;
        let f = extract_frames(&frames, &meta, &cfg, backend.as_mut()).map_err(|e| e.to_string())?;
        ensure(f.dim() == want, format!("spatial {}: dim {} vs {want}", cfg.backend.spatial_dim, f.dim()))?;
        dims.push(f.dim());
    }
    Ok(format!("spatial 1024 -> {}, 1536 -> {}", dims[0], dims[1]))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let (d, b) = (8, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = Array2::from_shape_fn((b, d), |_| rng.random_range(-2.0f32..2.0));
    let truth: Vec<f64> = (0..b).map(|_| rng.random_range(1.0..5.0)).collect();
    let mut model = MlpModel::init(d, (64, 32), 0.0, &mut rng);
    for t in model.params.tensors_mut() {
        // Non-trivial batch-norm affine terms and biases.
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let w = LossWeights::default();
    let loss_at = |m: &MlpModel| {
        let (pred, _) = m.clone().forward_train::<ChaCha8Rng>(x.view(), None).unwrap();
        composite_loss(&pred, &truth, &w)
    };
    let (pred, cache) = model.clone().forward_train::<ChaCha8Rng>(x.view(), None).unwrap();
    let grads = model.backward(&cache, &composite_grad(&pred, &truth, &w));
    let h = 1e-5;
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (ti, name) in fragvqa_core::regressor::Params::NAMES.iter().enumerate() {
        let n = model.params.tensors()[ti].len();
        for k in 0..n {
            let orig = model.params.tensors()[ti][k];
            model.params.tensors_mut()[ti][k] = orig + h;
            let up = loss_at(&model);
            model.params.tensors_mut()[ti][k] = orig - h;
            let down = loss_at(&model);
            model.params.tensors_mut()[ti][k] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grads.tensors()[ti][k];
            let abs = (fd - an).abs();
            let rel = abs / fd.abs().max(an.abs()).max(1e-300);
            ensure(
                abs <= 1e-6 || rel <= 1e-4,
                format!("{name}[{k}]: analytic {an:e} vs numeric {fd:e}"),
            )?;
            worst = worst.max(abs);
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{checked} parameters, max abs error {worst:.1e}"))
}

fn rank_hand_case() -> Check {
    let got = rank_loss(&[0.5, 0.0], &[1.0, 0.0], 0.0);
    ensure(got == 0.25, format!("got {got}"))?;
    Ok("0.25 exactly".into())
}

fn synthetic_corpus(n: usize, seed: u64) -> Vec<(Vec<Frame>, VideoMeta)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let params = SynthParams {
                seed: rng.random(),
                shapes: rng.random_range(1..7),
                speed: rng.random_range(0.0..0.8),
                noise: rng.random_range(0.0..30.0),
                blockiness: if rng.random_bool(0.5) { rng.random_range(0.02..0.15) } else { 0.0 },
            };
            let clip = SynthClip::new(params);
            (clip.frames(64, 48, 9, 8), synth_meta(64, 48, 9, 8))
        })
        .collect()
}

fn toy_features(corpus: &[(Vec<Frame>, VideoMeta)], cfg: &PipelineConfig) -> Result<Array2<f32>, String> {
    let feats: Vec<Vec<f32>> = corpus
        .par_iter()
        .map_init(
            || open_backend(&cfg.backend).unwrap(),
            |backend, (frames, meta)| {
                extract_frames(frames, meta, cfg, backend.as_mut()).map(|f| f.values)
            },
        )
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let rows: Vec<&[f32]> = feats.iter().map(Vec::as_slice).collect();
    feature_matrix(&rows).map_err(|e| e.to_string())
}

const NULL_SHUFFLES: u64 = 4;

fn overfit_sanity() -> Check {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let x = toy_features(&synthetic_corpus(64, 14), &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    // Labels are a fixed linear function of the standardised features.
    let cols = x.ncols();
    let w: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean: Vec<f64> = (0..cols).map(|j| x.column(j).iter().map(|&v| v as f64).sum::<f64>() / 64.0).collect();
    let sd: Vec<f64> = (0..cols)
        .map(|j| {
            let var = x.column(j).iter().map(|&v| (v as f64 - mean[j]).powi(2)).sum::<f64>() / 64.0;
            var.sqrt().max(1e-12)
        })
        .collect();
    let raw: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(j, &v)| w[j] * (v as f64 - mean[j]) / sd[j]).sum())
        .collect();
    let (lo, hi) = raw.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let labels: Vec<f64> = raw.iter().map(|v| 1.0 + 4.0 * (v - lo) / (hi - lo)).collect();

    let train_cfg = TrainConfig { seed: 16, ..TrainConfig::fine_tune() };
    let out = train(x.view(), &labels, &train_cfg).map_err(|e| e.to_string())?;
    let xt = select_rows(x.view(), &out.train_indices);
    let yt: Vec<f64> = out.train_indices.iter().map(|&i| labels[i]).collect();
    let pred = out.model.forward_eval(xt.view()).map_err(|e| e.to_string())?;
    let train_srcc = srcc(&pred, &yt).map_err(|e| e.to_string())?;
    ensure(train_srcc >= 0.95, format!("train SRCC {train_srcc:.4} < 0.95"))?;
    let fit_time = start.elapsed();
    within(fit_time, Duration::from_secs(120))?;

    // Null control: the same labels permuted against the features. One
    // 13-row validation set is too noisy on its own, so average a few shuffles.
    let mut null_srcc = 0.0;
    for k in 0..NULL_SHUFFLES {
        let mut null = labels.clone();
        null.shuffle(&mut rng);
        let cfg = TrainConfig { seed: 17 + k, ..train_cfg.clone() };
        let out = train(x.view(), &null, &cfg).map_err(|e| e.to_string())?;
        let xv = select_rows(x.view(), &out.val_indices);
        let yv: Vec<f64> = out.val_indices.iter().map(|&i| null[i]).collect();
        let pred = out.model.forward_eval(xv.view()).map_err(|e| e.to_string())?;
        null_srcc += srcc(&pred, &yv).map_err(|e| e.to_string())? / NULL_SHUFFLES as f64;
    }
    ensure(null_srcc.abs() < 0.4, format!("null-label val SRCC {null_srcc:.4}"))?;
    Ok(format!(
        "train SRCC {train_srcc:.4} in {:.1}s, mean null val SRCC {null_srcc:.4} over {NULL_SHUFFLES} shuffles",
        fit_time.as_secs_f64()
    ))
}

fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn brute_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut conc, mut disc, mut tie_a, mut tie_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                tie_a += 1;
            }
            if db == 0.0 {
                tie_b += 1;
            }
            if da != 0.0 && db != 0.0 {
                if (da > 0.0) == (db > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let total = (n * (n - 1) / 2) as i64;
    ((conc - disc) as f64) / (((total - tie_a) as f64) * ((total - tie_b) as f64)).sqrt()
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..50);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25 + 1.0).collect();
        if a.iter().all(|&v| v == a[0]) || b.iter().all(|&v| v == b[0]) {
            continue;
        }
        let close = |name: &str, got: f64, want: f64| -> Result<f64, String> {
            let err = (got - want).abs();
            ensure(err <= 1e-12, format!("{name} n={n}: {got} vs {want}"))?;
            Ok(err)
        };
        worst = worst.max(close("SRCC", srcc(&a, &b).unwrap(), brute_pearson(&brute_ranks(&a), &brute_ranks(&b)))?);
        worst = worst.max(close("PLCC", plcc(&a, &b).unwrap(), brute_pearson(&a, &b))?);
        let r = (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64).sqrt();
        worst = worst.max(close("RMSE", rmse(&a, &b).unwrap(), r)?);
        let k = krcc(&a, &b).unwrap();
        let kb = brute_tau_b(&b, &a);
        ensure(k == kb, format!("KRCC n={n}: {k} vs {kb}"))?;
        done += 1;
    }
    Ok(format!("100 vectors, max error {worst:.1e}, KRCC exact"))
}

fn chunking() -> Check {
    let make = |n: usize| -> Vec<_> {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let frames: Vec<Frame> = (0..=n)
            .map(|i| Frame::from_image(i as u64, random_frame(&mut rng, 8, 8, 255)))
            .collect();
        let cfg = FragConfig { patch_size: 4, target_size: 8, ..FragConfig::default() };
        frames.windows(2).map(|w| fragment_pair(&w[0], &w[1], &cfg).unwrap()).collect()
    };
    let meta = synth_meta(8, 8, 0, 30);
    let cfg = ChunkConfig {
        chunk_length: Some(30),
        ..ChunkConfig::default()
    };
    let chunks = chunk_triplets(make(45), &meta, &cfg).map_err(|e| e.to_string())?;
    ensure(chunks.len() == 1, format!("N'=45: {} chunks", chunks.len()))?;
    ensure(chunks[0].pad_count == 0 && chunks[0].len() == 30, "N'=45: chunk shape")?;

    let chunks = chunk_triplets(make(10), &meta, &cfg).map_err(|e| e.to_string())?;
    ensure(chunks.len() == 1, format!("N'=10: {} chunks", chunks.len()))?;
    let c = &chunks[0];
    ensure(c.pad_count == 20 && c.len() == 30, format!("N'=10: pad {}", c.pad_count))?;
    let last = &c.entries[9];
    for e in &c.entries[10..] {
        ensure(
            e.resized_frame.as_bytes() == last.resized_frame.as_bytes()
                && e.frag_residual.as_bytes() == last.frag_residual.as_bytes()
                && e.frag_frame.as_bytes() == last.frag_frame.as_bytes()
                && e.coords == last.coords
                && e.source_index == last.source_index,
            "padding entry differs from the last real entry",
        )?;
    }
    Ok("N'=45 -> 1 chunk; N'=10 -> 1 chunk, pad 20, byte-equal padding".into())
}

fn write_corpus(dir: &Path, corpus: &[(Vec<Frame>, VideoMeta)]) -> Vec<PathBuf> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, (frames, meta))| {
            let path = dir.join(format!("video_{i:02}.y4m"));
            let file = std::fs::File::create(&path).unwrap();
            write_y4m(std::io::BufWriter::new(file), meta.frame_rate, frames).unwrap();
            path
        })
        .collect()
}

/// Extract → train → save → load → predict; returns the three artifacts.
fn full_run(videos: &[PathBuf], labels: &[f64], dir: &Path) -> Result<[Vec<u8>; 3], String> {
    let err = |e: fragvqa_core::Error| e.to_string();
    let mut cfg = PipelineConfig::default();
    cfg.train.seed = 21;
    cfg.train.epochs = 60;
    let mut backend = open_backend(&cfg.backend).map_err(err)?;
    let mut file = DvqfFile::new(cfg.backend.fused_dim());
    for path in videos {
        let f = extract_path(path, &cfg, backend.as_mut()).map_err(err)?;
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        file.push(id, f.values).map_err(err)?;
    }
    let features_path = dir.join("features.dvqf");
    file.write(&features_path).map_err(err)?;

    let file = DvqfFile::read(&features_path).map_err(err)?;
    let rows: Vec<&[f32]> = file.records.iter().map(|r| r.values.as_slice()).collect();
    let x = feature_matrix(&rows).map_err(err)?;
    let out = train(x.view(), labels, &cfg.train).map_err(err)?;
    let model_path = dir.join("model.ckpt");
    save_checkpoint(&model_path, &out.model, &cfg.train_hash(), cfg.train.seed).map_err(err)?;

    let (_, model) = load_checkpoint(&model_path).map_err(err)?;
    let scores = predict_rows(&model, x.view()).map_err(err)?;
    let ids: Vec<String> = file.records.iter().map(|r| r.id.clone()).collect();
    let csv = scores_csv(&ids, &scores).map_err(err)?;
    Ok([
        std::fs::read(&features_path).unwrap(),
        std::fs::read(&model_path).unwrap(),
        csv.into_bytes(),
    ])
}

fn determinism() -> Check {
    let corpus = synthetic_corpus(16, 18);
    let src = tempfile::tempdir().unwrap();
    let videos = write_corpus(src.path(), &corpus);
    let labels: Vec<f64> = (0..16).map(|i| 1.0 + (i * 7 % 16) as f64 / 4.0).collect();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = full_run(&videos, &labels, a.path())?;
    let second = full_run(&videos, &labels, b.path())?;
    for (name, (x, y)) in ["feature file", "checkpoint", "score CSV"].iter().zip(first.iter().zip(&second)) {
        ensure(x == y, format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "features {} B, checkpoint {} B, scores {} B identical",
        first[0].len(),
        first[1].len(),
        first[2].len()
    ))
}

fn bench_shape() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let clip = SynthClip::new(SynthParams { noise: 4.0, ..SynthParams::default() });
    let mut videos = Vec::new();
    for (w, h) in [(960, 540), (3840, 2160)] {
        let path = dir.path().join(format!("synthetic_{h}p.y4m"));
        let file = std::fs::File::create(&path).unwrap();
        write_y4m(
            std::io::BufWriter::new(file),
            Rational::new(8, 1).unwrap(),
            &clip.frames(w, h, 9, 8),
        )
        .map_err(|e| e.to_string())?;
        videos.push(path);
    }
    let cfg = PipelineConfig::default();
    let report = run_bench(&videos, &cfg, None, 10).map_err(|e| e.to_string())?;
    let (lo, hi) = (&report.rows[0].mean, &report.rows[1].mean);
    let extract_ratio = hi.extract / lo.extract;
    let fragment_ratio = hi.fragment / lo.fragment;
    ensure(
        (0.8..=1.25).contains(&extract_ratio),
        format!("extract 2160p/540p ratio {extract_ratio:.3}"),
    )?;
    ensure(fragment_ratio <= 20.0, format!("fragment 2160p/540p ratio {fragment_ratio:.2}"))?;
    ensure(report.rows.iter().all(|r| r.repeats == 10), "repeat count")?;
    Ok(format!(
        "extract ratio {extract_ratio:.3}, fragment ratio {fragment_ratio:.2} (540p fragment {:.1} ms, extract {:.1} ms)",
        lo.fragment * 1e3,
        lo.extract * 1e3
    ))
}

fn main() {
    let checks: [(&str, fn() -> Check); 11] = [
        ("top-T count law", eq3_law),
        ("fragmentation oracle", fragmentation_oracle),
        ("alignment invariant", alignment_invariant),
        ("dimension law", dimension_law),
        ("gradient check", gradient_check),
        ("rank-loss hand case", rank_hand_case),
        ("overfit sanity", overfit_sanity),
        ("metric oracles", metric_oracles),
        ("chunking", chunking),
        ("determinism", determinism),
        ("bench shape", bench_shape),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
