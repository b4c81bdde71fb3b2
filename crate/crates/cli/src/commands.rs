use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fragvqa_core::bench::{run_bench, DEFAULT_BENCH_REPEATS};
use fragvqa_core::features::{
    open_backend, read_sidecar, sidecar_path, write_sidecar, DvqfFile, SidecarEntry,
};
use fragvqa_core::fragmentation::{dump_triplet, fragment_pair, patch_scores, DumpFormat};
use fragvqa_core::frame_io::{open_video, write_y4m, Frame, Rational};
use fragvqa_core::pipeline::{
    extract_path, feature_matrix, predict_rows, read_labels, repeated_eval, scores_csv,
};
use fragvqa_core::regressor::{load_checkpoint, save_checkpoint, train as fit};
use fragvqa_core::synth::{SynthClip, SynthParams};
use fragvqa_core::{Error, Result};
use rayon::prelude::*;

use crate::GlobalOpts;

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum DumpArg {
    Png,
    Raw,
}

#[derive(Args, Debug)]
pub struct FragmentArgs {
    /// Input video (.y4m, raw .rgb with sidecar, or `-` for Y4M on stdin).
    pub video: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    pub format: DumpArg,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Input videos.
    pub videos: Vec<PathBuf>,
    /// Text file listing one video path per line.
    #[arg(long)]
    pub list: Option<PathBuf>,
    /// Feature file to create or extend.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Optional `video_id,mos` CSV recorded in the sidecar.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long = "model-out", short)]
    pub model_out: PathBuf,
    /// Training log CSV; defaults to `<model-out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Score every record of a feature file.
    #[arg(long, conflicts_with = "videos")]
    pub features: Option<PathBuf>,
    /// Score videos directly.
    #[arg(long = "video")]
    pub videos: Vec<PathBuf>,
    /// Scores CSV; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Dataset name shown in the table.
    #[arg(long, default_value = "dataset")]
    pub name: String,
    /// Per-repeat metrics CSV.
    #[arg(long)]
    pub runs_csv: Option<PathBuf>,
    /// Median metrics as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Videos to time; each is one row of the report.
    pub videos: Vec<PathBuf>,
    /// Render a synthetic clip at 540p and 2160p and time those.
    #[arg(long)]
    pub synthetic: bool,
    /// Frames in the synthetic clip.
    #[arg(long, default_value_t = 9)]
    pub frames: usize,
    /// Report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn video_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Holds `<path>.lock` for the lifetime of the guard.
struct FileLock(PathBuf);

impl FileLock {
    fn acquire(path: &Path) -> Result<Self> {
        let mut name = path.as_os_str().to_owned();
        name.push(".lock");
        let lock = PathBuf::from(name);
        File::create_new(&lock).map_err(|e| {
            Error::io(&lock, std::io::Error::new(e.kind(), "output is locked by another run"))
        })?;
        Ok(Self(lock))
    }
}

impl Drop for FileLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn fragment(opts: &GlobalOpts, args: &FragmentArgs) -> Result<()> {
    let cfg = opts.pipeline_config()?;
    let (meta, frames) = open_video(&args.video)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let format = match args.format {
        DumpArg::Png => DumpFormat::Png,
        DumpArg::Raw => DumpFormat::Raw,
    };
    let mut prev: Option<Frame> = None;
    let mut frame_count = 0usize;
    let mut triplets = 0usize;
    let mut grid = None;
    for frame in frames {
        let frame = frame?;
        frame_count += 1;
        if let Some(p) = &prev {
            let t = fragment_pair(p, &frame, &cfg.frag)?;
            dump_triplet(&t, &args.out, format)?;
            triplets += 1;
        }
        prev = Some(frame);
    }
    if let Some(f) = &prev {
        // Grid geometry depends only on the frame size.
        let g = patch_scores(f.image(), cfg.frag.patch_size)?;
        grid = Some((g.rows, g.cols));
    }
    let (rows, cols) = grid.unwrap_or((0, 0));
    let manifest = serde_json::json!({
        "video": args.video.display().to_string(),
        "width": meta.width,
        "height": meta.height,
        "frame_rate": [meta.frame_rate.num, meta.frame_rate.den],
        "frames": frame_count,
        "triplets": triplets,
        "patch_size": cfg.frag.patch_size,
        "target_size": cfg.frag.target_size,
        "grid": [rows, cols],
        "top_t": cfg.frag.top_t(),
        "config_hash": cfg.feature_hash(),
    });
    let path = args.out.join("manifest.json");
    let mut text = serde_json::to_vec_pretty(&manifest).expect("json value");
    text.push(b'\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!(
        "frames {frame_count}, triplets {triplets}, grid {rows}x{cols}, T={}",
        cfg.frag.top_t()
    );
    Ok(())
}

fn collect_inputs(args: &ExtractArgs) -> Result<Vec<PathBuf>> {
    let mut inputs = args.videos.clone();
    if let Some(list) = &args.list {
        let text = fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
        let base = list.parent().unwrap_or(Path::new(""));
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let p = PathBuf::from(line);
            inputs.push(if p.is_absolute() { p } else { base.join(p) });
        }
    }
    Ok(inputs)
}

fn label_map(path: &Path) -> Result<BTreeMap<String, f64>> {
    Ok(read_labels(path)?.into_iter().collect())
}

pub fn extract(opts: &GlobalOpts, args: &ExtractArgs) -> Result<()> {
    let cfg = opts.pipeline_config()?;
    let inputs = collect_inputs(args)?;
    let labels = match &args.labels {
        Some(p) => label_map(p)?,
        None => BTreeMap::new(),
    };
    // Opening one backend up front surfaces model problems before any work.
    let probe = open_backend(&cfg.backend)?;
    let dim = probe.spec().fused_dim();
    drop(probe);

    let _lock = FileLock::acquire(&args.out)?;
    let side = sidecar_path(&args.out);
    let (mut file, mut sidecar) = if args.out.exists() {
        let file = DvqfFile::read(&args.out)?;
        if file.dim != dim {
            return Err(Error::Format(format!(
                "{} holds {}-dim features, this configuration produces {dim}",
                args.out.display(),
                file.dim
            )));
        }
        let sidecar = if side.exists() { read_sidecar(&side)? } else { BTreeMap::new() };
        (file, sidecar)
    } else {
        (DvqfFile::new(dim), BTreeMap::new())
    };

    let mut seen: HashSet<String> = file.records.iter().map(|r| r.id.clone()).collect();
    let mut todo = Vec::new();
    for path in inputs {
        let id = video_id(&path);
        if seen.insert(id.clone()) {
            todo.push((id, path));
        } else {
            opts.progress(format!("warning: skipping duplicate id `{id}` ({})", path.display()));
        }
    }

    let results: Vec<Result<_>> = todo
        .par_iter()
        .map_init(
            || open_backend(&cfg.backend),
            |backend, (id, path)| {
                let backend = backend.as_mut().map_err(|e| Error::Backend(e.to_string()))?;
                let feature = extract_path(path, &cfg, backend.as_mut())?;
                opts.progress(format!("extracted {id} ({} chunks)", feature.chunk_count));
                Ok(feature)
            },
        )
        .collect();
    for ((id, path), feature) in todo.into_iter().zip(results) {
        let feature = feature?;
        sidecar.insert(
            id.clone(),
            SidecarEntry {
                path: path.display().to_string(),
                mos: labels.get(&id).copied(),
                chunk_count: feature.chunk_count,
                backend_id: feature.backend_id.clone(),
                config_hash: feature.config_hash.clone(),
            },
        );
        file.push(id, feature.values)?;
    }
    write_atomic(&args.out, &file.to_bytes())?;
    write_sidecar(&side, &sidecar)?;
    println!("{} videos, dim {}", file.records.len(), file.dim);
    Ok(())
}

/// Feature rows and labels for every labelled id, in feature-file order.
fn labelled_rows<'a>(features: &'a DvqfFile, labels: &Path) -> Result<(Vec<String>, Vec<&'a [f32]>, Vec<f64>)> {
    let labels = label_map(labels)?;
    if let Some(missing) = labels.keys().find(|id| !features.contains(id)) {
        return Err(Error::Format(format!("labelled video `{missing}` has no features")));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for r in &features.records {
        if let Some(&y) = labels.get(&r.id) {
            ids.push(r.id.clone());
            rows.push(r.values.as_slice());
            ys.push(y);
        }
    }
    Ok((ids, rows, ys))
}

pub fn train(opts: &GlobalOpts, args: &TrainArgs) -> Result<()> {
    let cfg = opts.pipeline_config()?;
    let features = DvqfFile::read(&args.features)?;
    let (_, rows, ys) = labelled_rows(&features, &args.labels)?;
    let x = feature_matrix(&rows)?;
    opts.progress(format!("training on {} videos, dim {}", ys.len(), features.dim));
    let outcome = fit(x.view(), &ys, &cfg.train)?;
    save_checkpoint(&args.model_out, &outcome.model, &cfg.train_hash(), cfg.train.seed)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut s = args.model_out.as_os_str().to_owned();
        s.push(".log.csv");
        PathBuf::from(s)
    });
    fs::write(&log_path, outcome.log.to_csv()).map_err(|e| Error::io(&log_path, e))?;
    let swa = outcome
        .log
        .swa_val_rmse
        .map(|r| format!("{r:.4}"))
        .unwrap_or_else(|| "-".into());
    println!(
        "best epoch {} val rmse {:.4}, swa val rmse {swa}, selected {:?}",
        outcome.log.best_epoch, outcome.log.best_val_rmse, outcome.log.selected
    );
    Ok(())
}

pub fn predict(opts: &GlobalOpts, args: &PredictArgs) -> Result<()> {
    let (_, model) = load_checkpoint(&args.model)?;
    let (ids, rows): (Vec<String>, Vec<Vec<f32>>) = if let Some(path) = &args.features {
        let file = DvqfFile::read(path)?;
        file.records.into_iter().map(|r| (r.id, r.values)).unzip()
    } else if !args.videos.is_empty() {
        let cfg = opts.pipeline_config()?;
        let results: Vec<Result<(String, Vec<f32>)>> = args
            .videos
            .par_iter()
            .map_init(
                || open_backend(&cfg.backend),
                |backend, path| {
                    let backend = backend.as_mut().map_err(|e| Error::Backend(e.to_string()))?;
                    let f = extract_path(path, &cfg, backend.as_mut())?;
                    Ok((video_id(path), f.values))
                },
            )
            .collect();
        results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip()
    } else {
        return Err(Error::Config("give --features or at least one --video".into()));
    };
    if let Some(r) = rows.iter().find(|r| r.len() != model.input_dim()) {
        return Err(Error::Format(format!(
            "model expects {} features, got {}",
            model.input_dim(),
            r.len()
        )));
    }
    let scores = if rows.is_empty() {
        Vec::new()
    } else {
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        predict_rows(&model, feature_matrix(&refs)?.view())?
    };
    let csv = scores_csv(&ids, &scores)?;
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

pub fn eval(opts: &GlobalOpts, args: &EvalArgs) -> Result<()> {
    let cfg = opts.pipeline_config()?;
    let features = DvqfFile::read(&args.features)?;
    let (_, rows, ys) = labelled_rows(&features, &args.labels)?;
    let x = feature_matrix(&rows)?;
    opts.progress(format!("{} repeats over {} videos", cfg.eval.repeats, ys.len()));
    let result = repeated_eval(x.view(), &ys, &cfg)?;
    let m = &result.median;
    println!("{:<16} {:>8} {:>8} {:>8} {:>8}", "", "SRCC", "PLCC", "KRCC", "RMSE");
    println!(
        "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
        args.name, m.srcc, m.plcc, m.krcc, m.rmse
    );
    if let Some(path) = &args.runs_csv {
        fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.json {
        let doc = serde_json::json!({
            "dataset": args.name,
            "repeats": result.runs.len(),
            "n": m.n,
            "srcc": m.srcc,
            "plcc": m.plcc,
            "krcc": m.krcc,
            "rmse": m.rmse,
        });
        let mut text = serde_json::to_vec_pretty(&doc).expect("json value");
        text.push(b'\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn bench(opts: &GlobalOpts, args: &BenchArgs) -> Result<()> {
    let mut cfg = opts.pipeline_config()?;
    if opts.repeats.is_none() {
        cfg.eval.repeats = DEFAULT_BENCH_REPEATS;
    }
    let mut videos = args.videos.clone();
    let scratch = if args.synthetic {
        let dir = std::env::temp_dir().join(format!("fragvqa-bench-{}", std::process::id()));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let clip = SynthClip::new(SynthParams { noise: 4.0, ..Default::default() });
        for (w, h) in [(960, 540), (3840, 2160)] {
            let path = dir.join(format!("synthetic_{h}p.y4m"));
            let out = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let fps = args.frames.max(2) as u32 - 1;
            write_y4m(
                std::io::BufWriter::new(out),
                Rational::new(fps, 1)?,
                &clip.frames(w, h, args.frames, fps),
            )?;
            videos.push(path);
        }
        Some(dir)
    } else {
        None
    };
    if videos.is_empty() {
        return Err(Error::Config("bench needs at least one video or --synthetic".into()));
    }
    opts.progress(format!("timing {} videos × {} repeats", videos.len(), cfg.eval.repeats));
    let report = run_bench(&videos, &cfg, None, cfg.eval.repeats);
    if let Some(dir) = scratch {
        let _ = fs::remove_dir_all(dir);
    }
    let report = report?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        let mut text = serde_json::to_vec_pretty(&report).expect("report serialises");
        text.push(b'\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
