//! Three-layer MLP with batch normalisation, exact GELU, and dropout.
//!
//! `input → standardise → [Linear → BatchNorm → GELU → Dropout] × 2 → Linear`
//!
//! Everything is computed in `f64`. Gradients are derived by hand, including
//! the batch-statistics terms of batch normalisation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// Trainable tensors. Also used as the gradient, momentum and SWA buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `hidden1 × input`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub gamma1: Array1<f64>,
    pub beta1: Array1<f64>,
    /// `hidden2 × hidden1`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub gamma2: Array1<f64>,
    pub beta2: Array1<f64>,
    /// `1 × hidden2`.
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl Params {
    pub fn zeros(input: usize, h1: usize, h2: usize) -> Self {
        Self {
            w1: Array2::zeros((h1, input)),
            b1: Array1::zeros(h1),
            gamma1: Array1::zeros(h1),
            beta1: Array1::zeros(h1),
            w2: Array2::zeros((h2, h1)),
            b2: Array1::zeros(h2),
            gamma2: Array1::zeros(h2),
            beta2: Array1::zeros(h2),
            w3: Array2::zeros((1, h2)),
            b3: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.w1.ncols(), self.w1.nrows(), self.w2.nrows())
    }

    pub const NAMES: [&'static str; 10] = [
        "w1", "b1", "gamma1", "beta1", "w2", "b2", "gamma2", "beta2", "w3", "b3",
    ];

    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.gamma1.as_slice().expect("standard layout"),
            self.beta1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.gamma2.as_slice().expect("standard layout"),
            self.beta2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.gamma1.as_slice_mut().expect("standard layout"),
            self.beta1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.gamma2.as_slice_mut().expect("standard layout"),
            self.beta2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    fn new(n: usize) -> Self {
        Self {
            mean: Array1::zeros(n),
            var: Array1::ones(n),
        }
    }
}

/// Per-feature standardisation fitted on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    /// Column mean and population std; near-constant columns get std 1.
    pub fn fit(x: ArrayView2<'_, f32>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            Zip::from(&mut mean).and(&row).for_each(|m, &v| *m += v as f64);
        }
        mean /= n;
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            Zip::from(&mut var)
                .and(&row)
                .and(&mean)
                .for_each(|s, &v, &m| *s += (v as f64 - m).powi(2));
        }
        let std = var.mapv(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-8 {
                sd
            } else {
                1.0
            }
        });
        Self { mean, std }
    }

    pub fn apply(&self, x: ArrayView2<'_, f32>) -> Array2<f64> {
        let mut out = x.mapv(|v| v as f64);
        for mut row in out.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean)
                .and(&self.std)
                .for_each(|v, &m, &s| *v = (*v - m) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub norm: InputNorm,
    pub params: Params,
    pub bn1: RunningStats,
    pub bn2: RunningStats,
    pub dropout_p: f64,
    pub mode: Mode,
}

/// Activations saved by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Array2<f64>,
    layers: [LayerCache; 2],
}

#[derive(Debug, Clone)]
struct LayerCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Batch-norm output, GELU input.
    y: Array2<f64>,
    /// Dropout multipliers (0 or 1/(1-p)); `None` when dropout was off.
    mask: Option<Array2<f64>>,
    /// Layer output after dropout.
    h: Array2<f64>,
}

struct LayerRefs<'a> {
    w: &'a Array2<f64>,
    b: &'a Array1<f64>,
    gamma: &'a Array1<f64>,
    beta: &'a Array1<f64>,
}

impl MlpModel {
    /// He-uniform affine weights, zero biases, identity batch norm.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        hidden: (usize, usize),
        dropout_p: f64,
        rng: &mut R,
    ) -> Self {
        let (h1, h2) = hidden;
        let mut params = Params::zeros(input, h1, h2);
        for w in [&mut params.w1, &mut params.w2, &mut params.w3] {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        params.gamma1.fill(1.0);
        params.gamma2.fill(1.0);
        Self {
            norm: InputNorm::identity(input),
            params,
            bn1: RunningStats::new(h1),
            bn2: RunningStats::new(h2),
            dropout_p,
            mode: Mode::Train,
        }
    }

    pub fn zeros(input: usize, hidden: (usize, usize)) -> Self {
        Self {
            norm: InputNorm::identity(input),
            params: Params::zeros(input, hidden.0, hidden.1),
            bn1: RunningStats::new(hidden.0),
            bn2: RunningStats::new(hidden.1),
            dropout_p: 0.1,
            mode: Mode::Eval,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.w1.ncols()
    }

    pub fn hidden(&self) -> (usize, usize) {
        (self.params.w1.nrows(), self.params.w2.nrows())
    }

    fn check_input(&self, x: ArrayView2<'_, f32>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input".into()));
        }
        Ok(())
    }

    fn layer(&self, k: usize) -> LayerRefs<'_> {
        let p = &self.params;
        if k == 0 {
            LayerRefs {
                w: &p.w1,
                b: &p.b1,
                gamma: &p.gamma1,
                beta: &p.beta1,
            }
        } else {
            LayerRefs {
                w: &p.w2,
                b: &p.b2,
                gamma: &p.gamma2,
                beta: &p.beta2,
            }
        }
    }

    fn output(&self, h: &Array2<f64>) -> Vec<f64> {
        let b3 = self.params.b3[0];
        h.dot(&self.params.w3.t())
            .column(0)
            .iter()
            .map(|v| v + b3)
            .collect()
    }

    /// Eval-mode forward on raw features. Does not touch any state.
    pub fn forward_eval(&self, x: ArrayView2<'_, f32>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if x.nrows() == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut h = self.norm.apply(x);
        for (k, stats) in [&self.bn1, &self.bn2].into_iter().enumerate() {
            let l = self.layer(k);
            let mut z = h.dot(&l.w.t());
            for mut row in z.rows_mut() {
                Zip::from(&mut row)
                    .and(l.b)
                    .and(&stats.mean)
                    .and(&stats.var)
                    .and(l.gamma)
                    .and(l.beta)
                    .for_each(|v, &b, &m, &s2, &g, &be| {
                        *v = gelu(g * (*v + b - m) / (s2 + BN_EPS).sqrt() + be);
                    });
            }
            h = z;
        }
        Ok(self.output(&h))
    }

    /// Train-mode forward with batch statistics. Running statistics are
    /// updated; dropout is applied only when `rng` is given.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: ArrayView2<'_, f32>,
        rng: Option<&mut R>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let input = self.norm.apply(x);
        self.forward_train_normalized(input, rng)
    }

    /// As [`forward_train`](Self::forward_train) on already-standardised input.
    pub fn forward_train_normalized<R: Rng + ?Sized>(
        &mut self,
        input: Array2<f64>,
        mut rng: Option<&mut R>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let b = input.nrows();
        if b < 2 {
            return Err(Error::Contract(format!(
                "train-mode batch norm needs at least 2 samples, got {b}"
            )));
        }
        let keep = 1.0 - self.dropout_p;
        let mut layers = Vec::with_capacity(2);
        let mut batch_stats = Vec::with_capacity(2);
        let mut h_prev = input.clone();
        for k in 0..2 {
            let l = self.layer(k);
            let z = h_prev.dot(&l.w.t()) + l.b;
            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty");
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = &centered * &inv_std;
            let y = &xhat * l.gamma + l.beta;
            let mut h = y.mapv(gelu);
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout_p > 0.0 => {
                    let m = Array2::from_shape_fn(h.raw_dim(), |_| {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            batch_stats.push((mean, var));
            layers.push(LayerCache {
                xhat,
                inv_std,
                y,
                mask,
                h: h.clone(),
            });
            h_prev = h;
        }
        let pred = self.output(&h_prev);
        let unbias = b as f64 / (b as f64 - 1.0);
        for ((mean, var), stats) in batch_stats.into_iter().zip([&mut self.bn1, &mut self.bn2]) {
            stats.mean = &stats.mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
            stats.var = &stats.var * (1.0 - BN_MOMENTUM) + &(var * unbias) * BN_MOMENTUM;
        }
        let layers: [LayerCache; 2] = layers.try_into().expect("two hidden layers");
        Ok((pred, ForwardCache { x: input, layers }))
    }

    /// Gradients of a loss with `∂L/∂pred = dpred` w.r.t. every parameter.
    pub fn backward(&self, cache: &ForwardCache, dpred: &[f64]) -> Params {
        let b = cache.x.nrows();
        assert_eq!(dpred.len(), b, "one upstream gradient per sample");
        let mut g = self.params.zeros_like();
        let dout = Array1::from(dpred.to_vec());
        let h2 = &cache.layers[1].h;
        g.w3 = dout.view().insert_axis(Axis(0)).dot(h2);
        g.b3[0] = dout.sum();
        // Upstream gradient w.r.t. the output of hidden layer 2.
        let mut dh = dout.view().insert_axis(Axis(1)).dot(&self.params.w3);
        for k in (0..2).rev() {
            let lc = &cache.layers[k];
            let l = self.layer(k);
            let mut dy = dh;
            if let Some(mask) = &lc.mask {
                dy *= mask;
            }
            Zip::from(&mut dy).and(&lc.y).for_each(|d, &y| *d *= gelu_grad(y));
            let dgamma = (&dy * &lc.xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let dxhat = &dy * l.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &lc.xhat).sum_axis(Axis(0));
            let bf = b as f64;
            let mut dz = dxhat * bf - &sum_dxhat - &(&lc.xhat * &sum_dxhat_xhat);
            dz *= &(&lc.inv_std / bf);
            let input = if k == 0 { &cache.x } else { &cache.layers[0].h };
            let dw = dz.t().dot(input);
            let db = dz.sum_axis(Axis(0));
            if k == 1 {
                dh = dz.dot(&self.params.w2);
                g.w2 = dw;
                g.b2 = db;
                g.gamma2 = dgamma;
                g.beta2 = dbeta;
            } else {
                g.w1 = dw;
                g.b1 = db;
                g.gamma1 = dgamma;
                g.beta1 = dbeta;
                dh = Array2::zeros((0, 0));
            }
        }
        g
    }

    /// Replaces the running statistics with exact statistics of `x` (one
    /// full-batch pass, no dropout).
    pub fn recompute_bn_stats(&mut self, x: ArrayView2<'_, f32>) -> Result<()> {
        self.check_input(x)?;
        let b = x.nrows();
        if b < 2 {
            return Err(Error::Contract("need at least 2 samples for batch statistics".into()));
        }
        let mut h = self.norm.apply(x);
        let unbias = b as f64 / (b as f64 - 1.0);
        for k in 0..2 {
            let l = self.layer(k);
            let z = h.dot(&l.w.t()) + l.b;
            let mean = z.mean_axis(Axis(0)).expect("non-empty");
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty");
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            h = (&centered * &inv_std * l.gamma + l.beta).mapv(gelu);
            let stats = if k == 0 { &mut self.bn1 } else { &mut self.bn2 };
            stats.mean = mean;
            stats.var = var * unbias;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.is_finite()
            && [&self.bn1, &self.bn2]
                .iter()
                .all(|s| s.mean.iter().all(|v| v.is_finite()) && s.var.iter().all(|&v| v > 0.0))
    }
}

/// Predicts one score in eval mode.
pub fn predict(model: &MlpModel, features: &[f32]) -> Result<f64> {
    let x = ArrayView2::from_shape((1, features.len()), features)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(model.forward_eval(x)?[0])
}

pub fn predict_batch(model: &MlpModel, features: ArrayView2<'_, f32>) -> Result<Vec<f64>> {
    model.forward_eval(features)
}
