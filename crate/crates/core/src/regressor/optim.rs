//! SGD with momentum and weight decay, cosine learning-rate annealing, and
//! stochastic weight averaging.

use super::mlp::Params;

/// `lr0 · (1 + cos(π · epoch / epochs)) / 2`.
pub fn cosine_lr(lr0: f64, epoch: usize, epochs: usize) -> f64 {
    lr0 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos()) / 2.0
}

/// First epoch that feeds the SWA average.
pub fn swa_start_epoch(epochs: usize, frac: f64) -> usize {
    ((frac * epochs as f64).ceil() as usize).min(epochs)
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: Option<Params>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            buffers: None,
        }
    }

    /// `v ← μv + (g + λp)`, `p ← p − lr·v`; the first step seeds `v` with the
    /// decayed gradient.
    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) {
        let first = self.buffers.is_none();
        let buffers = self.buffers.get_or_insert_with(|| params.zeros_like());
        let (mu, wd) = (self.momentum, self.weight_decay);
        for ((p, g), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(buffers.tensors_mut())
        {
            for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                let d = g + wd * *p;
                *v = if first { d } else { mu * *v + d };
                *p -= lr * *v;
            }
        }
    }
}

/// Running arithmetic mean of parameter snapshots.
#[derive(Debug, Clone)]
pub struct SwaAverage {
    average: Option<Params>,
    count: usize,
}

impl Default for SwaAverage {
    fn default() -> Self {
        Self::new()
    }
}

impl SwaAverage {
    pub fn new() -> Self {
        Self {
            average: None,
            count: 0,
        }
    }

    pub fn update(&mut self, params: &Params) {
        self.count += 1;
        let n = self.count as f64;
        match &mut self.average {
            None => self.average = Some(params.clone()),
            Some(avg) => {
                for (a, p) in avg.tensors_mut().into_iter().zip(params.tensors()) {
                    for (a, &p) in a.iter_mut().zip(p) {
                        *a += (p - *a) / n;
                    }
                }
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn average(&self) -> Option<&Params> {
        self.average.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_endpoints() {
        let (lr0, e) = (0.01, 200);
        assert_eq!(cosine_lr(lr0, 0, e), lr0);
        assert_eq!(
            cosine_lr(lr0, e - 1, e),
            lr0 * (1.0 + (std::f64::consts::PI * (e - 1) as f64 / e as f64).cos()) / 2.0
        );
        assert!((cosine_lr(lr0, e / 2, e) - lr0 / 2.0).abs() < 1e-18);
        assert_eq!(swa_start_epoch(200, 0.75), 150);
        assert_eq!(swa_start_epoch(5, 0.75), 4);
    }

    #[test]
    fn sgd_matches_hand_update() {
        let mut p = Params::zeros(1, 1, 1);
        p.w1[[0, 0]] = 1.0;
        let mut g = p.zeros_like();
        g.w1[[0, 0]] = 0.5;
        let mut opt = Sgd::new(0.9, 0.1);
        opt.step(&mut p, &g, 0.1);
        // v = 0.5 + 0.1 = 0.6, p = 1 - 0.06
        assert!((p.w1[[0, 0]] - 0.94).abs() < 1e-15);
        opt.step(&mut p, &g, 0.1);
        let v = 0.9 * 0.6 + (0.5 + 0.1 * 0.94);
        assert!((p.w1[[0, 0]] - (0.94 - 0.1 * v)).abs() < 1e-15);
    }

    #[test]
    fn swa_is_mean_of_snapshots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut swa = SwaAverage::new();
        let mut snaps = Vec::new();
        for _ in 0..9 {
            let mut p = Params::zeros(3, 4, 2);
            for t in p.tensors_mut() {
                t.iter_mut().for_each(|v| *v = rng.random_range(-5.0..5.0));
            }
            swa.update(&p);
            snaps.push(p);
        }
        assert_eq!(swa.count(), 9);
        let avg = swa.average().unwrap();
        for (k, t) in avg.tensors().iter().enumerate() {
            for (i, &v) in t.iter().enumerate() {
                let mean = snaps.iter().map(|s| s.tensors()[k][i]).sum::<f64>() / 9.0;
                assert!((v - mean).abs() < 1e-12);
            }
        }
    }
}
