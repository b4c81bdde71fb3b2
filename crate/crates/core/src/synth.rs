//! Deterministic synthetic clips for tests, benchmarks and the demo page.
//!
//! Scene geometry lives in normalised coordinates, so the same parameters
//! rendered at two resolutions show the same content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::RgbBuffer;
use crate::frame_io::{Frame, Rational, VideoMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub shapes: usize,
    /// Shape speed in frame-widths per second.
    pub speed: f64,
    /// Peak amplitude of per-pixel noise, in 8-bit levels.
    pub noise: f64,
    /// Side of the square blocks the image is quantised to, as a fraction
    /// of the frame width (0 disables).
    pub blockiness: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            shapes: 4,
            speed: 0.25,
            noise: 0.0,
            blockiness: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Disc {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    r: f64,
    color: [f64; 3],
}

/// A clip description that can be rendered frame by frame at any size.
#[derive(Debug, Clone)]
pub struct SynthClip {
    params: SynthParams,
    discs: Vec<Disc>,
    background: [[f64; 3]; 2],
}

fn hash3(a: u64, b: u64, c: u64) -> u64 {
    let mut h = a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    h ^= c.wrapping_mul(0x1656_67b1_9e37_79f9);
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^ (h >> 29)
}

fn wrap(v: f64) -> f64 {
    v - v.floor()
}

impl SynthClip {
    pub fn new(params: SynthParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut color = || [0; 3].map(|_: i32| rng.random_range(20.0..235.0));
        let background = [color(), color()];
        let discs = (0..params.shapes)
            .map(|_| {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = params.speed * rng.random_range(0.5..1.5);
                Disc {
                    x: rng.random(),
                    y: rng.random(),
                    vx: speed * angle.cos(),
                    vy: speed * angle.sin(),
                    r: rng.random_range(0.05..0.2),
                    color: [0; 3].map(|_: i32| rng.random_range(0.0..255.0)),
                }
            })
            .collect();
        Self {
            params,
            discs,
            background,
        }
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    /// Frame at time `t` seconds.
    pub fn render(&self, width: usize, height: usize, t: f64) -> RgbBuffer {
        let mut out = RgbBuffer::filled(width, height, [0, 0, 0]);
        let aspect = height as f64 / width as f64;
        let centres: Vec<(f64, f64)> = self
            .discs
            .iter()
            .map(|d| (wrap(d.x + d.vx * t), wrap(d.y + d.vy * t) * aspect))
            .collect();
        let block = if self.params.blockiness > 0.0 {
            ((self.params.blockiness * width as f64).round() as usize).max(1)
        } else {
            1
        };
        let frame_key = (t * 1000.0).round() as u64;
        let bytes = out.as_bytes_mut();
        for y in 0..height {
            let sy = (y / block) * block;
            let v = (sy as f64 + 0.5) / width as f64;
            for x in 0..width {
                let sx = (x / block) * block;
                let u = (sx as f64 + 0.5) / width as f64;
                let mut px = [0.0; 3];
                for c in 0..3 {
                    px[c] = self.background[0][c] * (1.0 - u) + self.background[1][c] * u
                        + 20.0 * (12.0 * u + 7.0 * v).sin();
                }
                for (d, &(cx, cy)) in self.discs.iter().zip(&centres) {
                    let (dx, dy) = (u - cx, v - cy);
                    if dx * dx + dy * dy < d.r * d.r {
                        px = d.color;
                    }
                }
                let i = 3 * (y * width + x);
                for c in 0..3 {
                    let mut val = px[c];
                    if self.params.noise > 0.0 {
                        let h = hash3(self.params.seed, frame_key, (i + c) as u64);
                        val += self.params.noise * ((h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0);
                    }
                    bytes[i + c] = val.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        out
    }

    /// `count` frames at `fps`, indexed from 0.
    pub fn frames(&self, width: usize, height: usize, count: usize, fps: u32) -> Vec<Frame> {
        (0..count)
            .map(|i| Frame::from_image(i as u64, self.render(width, height, i as f64 / fps as f64)))
            .collect()
    }
}

pub fn synth_meta(width: usize, height: usize, count: usize, fps: u32) -> VideoMeta {
    VideoMeta {
        width,
        height,
        frame_rate: Rational::new(fps, 1).expect("fps > 0"),
        frame_count: Some(count as u64),
    }
}
