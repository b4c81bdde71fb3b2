//! Closed-form stand-in for the neural backbones.
//!
//! Produces a short vector of clip statistics and tiles it to the declared
//! widths. Cheap, exactly reproducible, and sensitive to the same things the
//! real branches respond to (brightness, contrast, edges, motion), which is
//! enough to exercise the pipeline end to end without model files.

use super::{BackendSpec, Clip, FeatureBackend};
use crate::error::Result;

/// Per channel: mean, variance, gradient energy, temporal-difference energy,
/// and four quadrant means.
pub const TOY_BASE_LEN: usize = 3 * 8;

/// Statistics of a normalised clip, laid out channel by channel as
/// `[mean, variance, gradient energy, temporal energy, q00, q01, q10, q11]`.
pub fn toy_backend_eval(clip: &Clip) -> Vec<f32> {
    let s = clip.size;
    let t = clip.frames;
    let mut out = Vec::with_capacity(TOY_BASE_LEN);
    for c in 0..3 {
        let n = (t * s * s) as f64;
        let mut sum = 0f64;
        let mut sq = 0f64;
        let mut grad = 0f64;
        let mut quad = [0f64; 4];
        for ti in 0..t {
            let p = clip.plane(c, ti);
            for y in 0..s {
                let row = &p[y * s..(y + 1) * s];
                let qy = usize::from(2 * y >= s) * 2;
                for x in 0..s {
                    let v = row[x] as f64;
                    sum += v;
                    sq += v * v;
                    quad[qy + usize::from(2 * x >= s)] += v;
                    if x + 1 < s {
                        let d = row[x + 1] as f64 - v;
                        grad += d * d;
                    }
                    if y + 1 < s {
                        let d = p[(y + 1) * s + x] as f64 - v;
                        grad += d * d;
                    }
                }
            }
        }
        let mut temporal = 0f64;
        for ti in 1..t {
            let (a, b) = (clip.plane(c, ti - 1), clip.plane(c, ti));
            temporal += a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = y as f64 - x as f64;
                    d * d
                })
                .sum::<f64>();
        }
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        let temporal = if t > 1 {
            temporal / ((t - 1) * s * s) as f64
        } else {
            0.0
        };
        // Quadrants of odd sizes are uneven; weight by their actual areas.
        let h0 = s.div_ceil(2);
        let areas = [h0 * h0, h0 * (s - h0), (s - h0) * h0, (s - h0) * (s - h0)];
        out.push(mean as f32);
        out.push(var as f32);
        out.push((grad / n) as f32);
        out.push(temporal as f32);
        for (q, &a) in quad.iter().zip(&areas) {
            out.push(if a == 0 { 0.0 } else { (q / (a * t) as f64) as f32 });
        }
    }
    out
}

fn tile(base: &[f32], dim: usize) -> Vec<f32> {
    base.iter().copied().cycle().take(dim).collect()
}

pub struct ToyBackend {
    spec: BackendSpec,
}

impl ToyBackend {
    pub fn new(spec: BackendSpec) -> Self {
        Self { spec }
    }
}

impl FeatureBackend for ToyBackend {
    fn id(&self) -> String {
        "toy-v1".into()
    }

    fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    fn motion(&mut self, slow: &Clip, fast: &Clip) -> Result<Vec<f32>> {
        let mut out = tile(&toy_backend_eval(slow), self.spec.slow_dim);
        out.extend(tile(&toy_backend_eval(fast), self.spec.fast_dim));
        Ok(out)
    }

    fn spatial(&mut self, frame: &Clip) -> Result<Vec<f32>> {
        Ok(tile(&toy_backend_eval(frame), self.spec.spatial_dim))
    }
}
