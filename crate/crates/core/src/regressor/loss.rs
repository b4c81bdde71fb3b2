//! Composite MAE + pairwise rank loss and its subgradient.

/// Loss weights and the rank-term dead zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mae_w: f64,
    pub rank_w: f64,
    /// Pairs whose label gap is below this contribute nothing.
    pub rank_margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mae_w: 0.6,
            rank_w: 1.0,
            rank_margin: 0.0,
        }
    }
}

pub fn mae_loss(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    assert!(!pred.is_empty());
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

#[inline]
fn sign_mask(ti: f64, tj: f64) -> f64 {
    if ti >= tj {
        1.0
    } else {
        -1.0
    }
}

/// Mean over all `N²` ordered pairs (diagonal included) of
/// `max(0, |t_i - t_j| - e_ij (p_i - p_j))`, with `e_ij = 1` when
/// `t_i >= t_j` and `-1` otherwise.
pub fn rank_loss(pred: &[f64], truth: &[f64], margin: f64) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len();
    assert!(n > 0);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let delta = (truth[i] - truth[j]).abs();
            if delta < margin {
                continue;
            }
            let d = pred[i] - pred[j];
            total += (delta - sign_mask(truth[i], truth[j]) * d).max(0.0);
        }
    }
    total / (n * n) as f64
}

pub fn composite_loss(pred: &[f64], truth: &[f64], w: &LossWeights) -> f64 {
    w.mae_w * mae_loss(pred, truth) + w.rank_w * rank_loss(pred, truth, w.rank_margin)
}

/// `∂L/∂pred` of the composite loss. Subgradients at kinks are zero.
pub fn composite_grad(pred: &[f64], truth: &[f64], w: &LossWeights) -> Vec<f64> {
    let n = pred.len();
    let mut g = vec![0.0; n];
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let r = pred[i] - truth[i];
        if r > 0.0 {
            g[i] += w.mae_w * inv_n;
        } else if r < 0.0 {
            g[i] -= w.mae_w * inv_n;
        }
    }
    if w.rank_w != 0.0 {
        let scale = w.rank_w / (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                let delta = (truth[i] - truth[j]).abs();
                if delta < w.rank_margin {
                    continue;
                }
                let e = sign_mask(truth[i], truth[j]);
                if delta - e * (pred[i] - pred[j]) > 0.0 {
                    g[i] -= scale * e;
                    g[j] += scale * e;
                }
            }
        }
    }
    g
}
