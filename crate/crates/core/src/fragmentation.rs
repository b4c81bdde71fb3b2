//! Patch-difference fragmentation.
//!
//! For each consecutive frame pair the absolute residual is split into a
//! grid of non-overlapping `p`×`p` patches, every patch is scored by the sum
//! of its residual samples, and the `T = ceil(s²/p²)` highest-scoring patches
//! are tiled into an `s`×`s` mosaic. The same coordinates are then used to cut
//! patches out of the current frame, so slot `k` of the fragmented frame and
//! slot `k` of the fragmented residual always cover the same source region.
//!
//! Scores sum all three RGB channels. Ties rank by ascending raster index.
//! Partial edge patches are never scored.

use serde::{Deserialize, Serialize};

use crate::buffer::RgbBuffer;
use crate::error::{Error, Result};
use crate::frame_io::Frame;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeFilter {
    #[default]
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FragConfig {
    pub patch_size: usize,
    pub target_size: usize,
    pub resize_filter: ResizeFilter,
}

impl Default for FragConfig {
    fn default() -> Self {
        Self {
            patch_size: 16,
            target_size: 224,
            resize_filter: ResizeFilter::Bilinear,
        }
    }
}

impl FragConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.target_size == 0 {
            return Err(Error::Config("patch and target size must be positive".into()));
        }
        if self.patch_size > self.target_size {
            return Err(Error::Config(format!(
                "patch size {} exceeds target size {}",
                self.patch_size, self.target_size
            )));
        }
        Ok(())
    }

    pub fn top_t(&self) -> usize {
        top_t_count(self.target_size, self.patch_size)
    }
}

/// Per-sample `|cur - prev|` over all three channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Residual {
    pub image: RgbBuffer,
    pub source_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchCoord {
    pub row: usize,
    pub col: usize,
}

impl PatchCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchScore {
    pub coord: PatchCoord,
    pub score: u64,
}

/// Raster-ordered scores of every complete patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    pub scores: Vec<PatchScore>,
}

impl ScoreGrid {
    pub fn score_at(&self, coord: PatchCoord) -> u64 {
        self.scores[coord.row * self.cols + coord.col].score
    }
}

/// The three per-frame components fed to the feature extractor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentTriplet {
    pub resized_frame: RgbBuffer,
    pub frag_residual: RgbBuffer,
    pub frag_frame: RgbBuffer,
    /// Selected patches in rank order; slot `k` of both mosaics is `coords[k]`.
    pub coords: Vec<PatchCoord>,
    /// Score of each entry of `coords`.
    pub scores: Vec<u64>,
    pub source_index: u64,
}

pub fn compute_residual(cur: &Frame, prev: &Frame) -> Result<Residual> {
    if cur.width() != prev.width() || cur.height() != prev.height() {
        return Err(Error::Shape(format!(
            "frame {} is {}x{} but frame {} is {}x{}",
            cur.index(),
            cur.width(),
            cur.height(),
            prev.index(),
            prev.width(),
            prev.height()
        )));
    }
    if cur.index() != prev.index() + 1 {
        return Err(Error::Contract(format!(
            "residual needs consecutive frames, got {} after {}",
            cur.index(),
            prev.index()
        )));
    }
    let values = cur
        .pixels()
        .iter()
        .zip(prev.pixels())
        .map(|(&a, &b)| a.abs_diff(b))
        .collect();
    Ok(Residual {
        image: RgbBuffer::new(cur.width(), cur.height(), values)?,
        source_index: cur.index(),
    })
}

/// Scores each complete `p`×`p` patch in raster order.
pub fn patch_scores(residual: &RgbBuffer, p: usize) -> Result<ScoreGrid> {
    let (w, h) = (residual.width(), residual.height());
    let rows = if p == 0 { 0 } else { h / p };
    let cols = if p == 0 { 0 } else { w / p };
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyGrid {
            patch: p,
            width: w,
            height: h,
        });
    }
    let mut sums = vec![0u64; rows * cols];
    let span = p * 3;
    for y in 0..rows * p {
        let row = residual.row(y);
        let acc = &mut sums[(y / p) * cols..(y / p + 1) * cols];
        for (c, slot) in acc.iter_mut().enumerate() {
            let chunk = &row[c * span..(c + 1) * span];
            *slot += chunk.iter().map(|&v| v as u64).sum::<u64>();
        }
    }
    let scores = sums
        .into_iter()
        .enumerate()
        .map(|(i, score)| PatchScore {
            coord: PatchCoord::new(i / cols, i % cols),
            score,
        })
        .collect();
    Ok(ScoreGrid {
        rows,
        cols,
        patch_size: p,
        scores,
    })
}

/// Number of patches needed to cover an `s`×`s` input: `ceil(s² / p²)`.
pub fn top_t_count(s: usize, p: usize) -> usize {
    assert!(p >= 1, "patch size must be positive");
    (s * s).div_ceil(p * p)
}

/// Picks the `t` highest-scoring patches, ties by raster order. Grids with
/// fewer than `t` patches repeat the full ranking cyclically.
pub fn select_top_patches(grid: &ScoreGrid, t: usize) -> Result<Vec<PatchCoord>> {
    if grid.scores.is_empty() {
        return Err(Error::EmptyGrid {
            patch: grid.patch_size,
            width: grid.cols * grid.patch_size,
            height: grid.rows * grid.patch_size,
        });
    }
    if t == 0 {
        return Ok(Vec::new());
    }
    // Raster index is unique, so (score desc, raster asc) is a total order.
    let key = |i: &usize| (std::cmp::Reverse(grid.scores[*i].score), *i);
    let mut order: Vec<usize> = (0..grid.scores.len()).collect();
    let keep = t.min(order.len());
    if keep < order.len() {
        order.select_nth_unstable_by_key(keep - 1, key);
        order.truncate(keep);
    }
    order.sort_unstable_by_key(key);
    Ok(order
        .iter()
        .cycle()
        .take(t)
        .map(|&i| grid.scores[i].coord)
        .collect())
}

/// Tiles source patches into an `s`×`s` canvas.
///
/// Destination slots run in raster order over a `ceil(s/p)`-wide slot grid and
/// slot `k` receives the patch at `coords[k]`. Slots on the right and bottom
/// edges are cropped to the top-left part of their patch when `s mod p != 0`.
/// That slot grid can hold more than `T` slots; the surplus reuses coords
/// cyclically.
pub fn assemble_fragment(
    source: &RgbBuffer,
    coords: &[PatchCoord],
    p: usize,
    s: usize,
) -> Result<RgbBuffer> {
    if p == 0 || s == 0 {
        return Err(Error::Config("patch and target size must be positive".into()));
    }
    let t = top_t_count(s, p);
    if coords.len() != t {
        return Err(Error::Contract(format!(
            "mosaic of {s}x{s} with patch {p} needs {t} coords, got {}",
            coords.len()
        )));
    }
    for c in coords {
        if (c.row + 1) * p > source.height() || (c.col + 1) * p > source.width() {
            return Err(Error::OutOfBounds(format!(
                "patch ({}, {}) of size {p} outside {}x{} source",
                c.row,
                c.col,
                source.width(),
                source.height()
            )));
        }
    }
    let slots_per_row = s.div_ceil(p);
    let mut out = vec![0u8; s * s * 3];
    for slot in 0..slots_per_row * slots_per_row {
        let coord = coords[slot % t];
        let (dy, dx) = ((slot / slots_per_row) * p, (slot % slots_per_row) * p);
        let (h, w) = (p.min(s - dy), p.min(s - dx));
        for r in 0..h {
            let src_row = source.row(coord.row * p + r);
            let src = &src_row[coord.col * p * 3..(coord.col * p + w) * 3];
            let off = ((dy + r) * s + dx) * 3;
            out[off..off + w * 3].copy_from_slice(src);
        }
    }
    RgbBuffer::new(s, s, out)
}

/// Bilinear resize to `s`×`s` with half-pixel-centred sampling.
pub fn resize_frame(image: &RgbBuffer, s: usize) -> RgbBuffer {
    resize_bilinear(image, s, s)
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

pub fn resize_bilinear(image: &RgbBuffer, out_w: usize, out_h: usize) -> RgbBuffer {
    assert!(out_w > 0 && out_h > 0, "zero-sized resize target");
    if image.width() == out_w && image.height() == out_h {
        return image.clone();
    }
    let xs = axis_taps(image.width(), out_w);
    let ys = axis_taps(image.height(), out_h);
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (image.row(y0), image.row(y1));
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let a = r0[x0 * 3 + c] as f64;
                let b = r0[x1 * 3 + c] as f64;
                let d = r1[x0 * 3 + c] as f64;
                let e = r1[x1 * 3 + c] as f64;
                let top = a + (b - a) * fx;
                let bottom = d + (e - d) * fx;
                let v = top + (bottom - top) * fy;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbBuffer::new(out_w, out_h, out).expect("sized above")
}

/// Residual, ranking, and both mosaics for one consecutive pair.
pub fn fragment_pair(prev: &Frame, cur: &Frame, cfg: &FragConfig) -> Result<FragmentTriplet> {
    cfg.validate()?;
    let (p, s) = (cfg.patch_size, cfg.target_size);
    let residual = compute_residual(cur, prev)?;
    let grid = patch_scores(&residual.image, p)?;
    let coords = select_top_patches(&grid, cfg.top_t())?;
    let scores = coords.iter().map(|&c| grid.score_at(c)).collect();
    Ok(FragmentTriplet {
        frag_residual: assemble_fragment(&residual.image, &coords, p, s)?,
        frag_frame: assemble_fragment(cur.image(), &coords, p, s)?,
        resized_frame: resize_frame(cur.image(), s),
        coords,
        scores,
        source_index: cur.index(),
    })
}

/// Which mosaic/resized components to write in a debug dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Png,
    Raw,
}

#[derive(Serialize)]
struct CoordsSidecar<'a> {
    source_index: u64,
    coords: Vec<[usize; 2]>,
    scores: &'a [u64],
}

/// Writes `<index>_{resized,frag_residual,frag_frame}.{png,rgb}` plus
/// `<index>_coords.json` into `dir`.
pub fn dump_triplet(
    triplet: &FragmentTriplet,
    dir: &std::path::Path,
    format: DumpFormat,
) -> Result<()> {
    let stem = format!("{:06}", triplet.source_index);
    let parts = [
        ("resized", &triplet.resized_frame),
        ("frag_residual", &triplet.frag_residual),
        ("frag_frame", &triplet.frag_frame),
    ];
    for (name, img) in parts {
        match format {
            DumpFormat::Png => {
                let path = dir.join(format!("{stem}_{name}.png"));
                image::save_buffer(
                    &path,
                    img.as_bytes(),
                    img.width() as u32,
                    img.height() as u32,
                    image::ExtendedColorType::Rgb8,
                )
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(&path, io),
                    other => Error::Format(other.to_string()),
                })?;
            }
            DumpFormat::Raw => {
                let path = dir.join(format!("{stem}_{name}.rgb"));
                std::fs::write(&path, img.as_bytes()).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    let sidecar = CoordsSidecar {
        source_index: triplet.source_index,
        coords: triplet.coords.iter().map(|c| [c.row, c.col]).collect(),
        scores: &triplet.scores,
    };
    let path = dir.join(format!("{stem}_coords.json"));
    std::fs::write(&path, serde_json::to_vec(&sidecar).expect("plain struct"))
        .map_err(|e| Error::io(&path, e))
}
