use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{composite_grad, composite_loss, LossWeights};
use super::mlp::{InputNorm, MlpModel, Mode};
use super::optim::{cosine_lr, swa_start_epoch, Sgd, SwaAverage};
use crate::error::{Error, Result};
use crate::metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub mae_w: f64,
    pub rank_w: f64,
    pub rank_margin: f64,
    pub swa_start_frac: f64,
    pub seed: u64,
    /// Fraction of the data used for fitting; the rest is validation.
    pub split: f64,
    pub hidden: (usize, usize),
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::fine_tune()
    }
}

impl TrainConfig {
    /// Small-dataset schedule: 200 epochs, lr 1e-2, weight decay 5e-4.
    pub fn fine_tune() -> Self {
        Self {
            epochs: 200,
            lr0: 1e-2,
            weight_decay: 5e-4,
            momentum: 0.9,
            batch_size: 256,
            mae_w: 0.6,
            rank_w: 1.0,
            rank_margin: 0.0,
            swa_start_frac: 0.75,
            seed: 0,
            split: 0.8,
            hidden: (256, 128),
            dropout: 0.1,
        }
    }

    /// Large-dataset schedule: 50 epochs, lr 1e-1, weight decay 5e-3.
    pub fn large_scale() -> Self {
        Self {
            epochs: 50,
            lr0: 1e-1,
            weight_decay: 5e-3,
            ..Self::fine_tune()
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            mae_w: self.mae_w,
            rank_w: self.rank_w,
            rank_margin: self.rank_margin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must lie strictly between 0 and 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if self.batch_size < 2 {
            return bad("batch size must be ≥ 2");
        }
        if self.mae_w < 0.0 || self.rank_w < 0.0 || self.rank_margin < 0.0 {
            return bad("loss weights and margin must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.swa_start_frac) {
            return bad("swa_start_frac must lie in [0, 1]");
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// Learning rate for `epoch`: cosine decay, held at `lr0` once SWA runs.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= swa_start_epoch(self.epochs, self.swa_start_frac) {
            self.lr0
        } else {
            cosine_lr(self.lr0, epoch, self.epochs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_rmse: f64,
    pub val_srcc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selected {
    BestCheckpoint,
    Swa,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub swa_val_rmse: Option<f64>,
    pub selected: Selected,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,val_rmse,val_srcc\n");
        for e in &self.epochs {
            let srcc = e.val_srcc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.lr, e.train_loss, e.val_rmse, srcc
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub log: TrainLog,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Seeded shuffle, then the first `round(split · n)` go to training.
pub fn split_indices(n: usize, split: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((split * n as f64).round() as usize).min(n);
    let val = idx.split_off(cut);
    (idx, val)
}

pub fn select_rows(x: ArrayView2<'_, f32>, rows: &[usize]) -> Array2<f32> {
    x.select(Axis(0), rows)
}

fn val_metrics(model: &MlpModel, x: ArrayView2<'_, f32>, y: &[f64]) -> Result<(f64, Option<f64>)> {
    let pred = model.forward_eval(x)?;
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("validation predictions".into()));
    }
    Ok((metrics::rmse(&pred, y)?, metrics::srcc(&pred, y).ok()))
}

/// Fits the regressor on a seeded split of `(features, labels)`.
///
/// Each epoch shuffles the training rows, runs minibatch SGD, and scores the
/// validation rows. The best-RMSE epoch is kept. From the SWA start epoch on
/// the parameters are also averaged once per epoch; the averaged model gets
/// exact batch-norm statistics from one pass over the training rows. The
/// returned model is whichever of the two validates better.
pub fn train(features: ArrayView2<'_, f32>, labels: &[f64], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} feature rows vs {} labels", labels.len())));
    }
    if n < 4 {
        return Err(Error::Config(format!("need at least 4 labelled videos, got {n}")));
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("labels".into()));
    }
    let (train_idx, val_idx) = split_indices(n, cfg.split, cfg.seed);
    if val_idx.len() < 2 {
        return Err(Error::Config(format!(
            "split {} leaves {} validation videos, need at least 2",
            cfg.split,
            val_idx.len()
        )));
    }
    if train_idx.len() < 2 {
        return Err(Error::Config("fewer than 2 training videos".into()));
    }
    let x_train = select_rows(features, &train_idx);
    let x_val = select_rows(features, &val_idx);
    let y_train: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();
    let y_val: Vec<f64> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_4c_0ffe);
    let mut model = MlpModel::init(features.ncols(), cfg.hidden, cfg.dropout, &mut rng);
    model.norm = InputNorm::fit(x_train.view());
    let x_train_norm = model.norm.apply(x_train.view());

    let weights = cfg.loss_weights();
    let mut opt = Sgd::new(cfg.momentum, cfg.weight_decay);
    let mut swa = SwaAverage::new();
    let swa_start = swa_start_epoch(cfg.epochs, cfg.swa_start_frac);
    let mut order: Vec<usize> = (0..train_idx.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MlpModel)> = None;

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        model.mode = Mode::Train;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let xb = x_train_norm.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y_train[i]).collect();
            let (pred, cache) = model.forward_train_normalized(xb, Some(&mut rng))?;
            loss_sum += composite_loss(&pred, &yb, &weights) * batch.len() as f64;
            seen += batch.len();
            let grads = model.backward(&cache, &composite_grad(&pred, &yb, &weights));
            opt.step(&mut model.params, &grads, lr);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        if epoch >= swa_start {
            swa.update(&model.params);
        }
        model.mode = Mode::Eval;
        let (val_rmse, val_srcc) = val_metrics(&model, x_val.view(), &y_val)?;
        if best.as_ref().is_none_or(|(r, _, _)| val_rmse < *r) {
            best = Some((val_rmse, epoch, model.clone()));
        }
        epochs.push(EpochLog {
            epoch,
            lr,
            train_loss: if seen > 0 { loss_sum / seen as f64 } else { 0.0 },
            val_rmse,
            val_srcc,
        });
    }

    let (best_rmse, best_epoch, best_model) = best.expect("at least one epoch");
    let mut chosen = best_model;
    let mut selected = Selected::BestCheckpoint;
    let mut swa_val_rmse = None;
    if let Some(avg) = swa.average() {
        let mut swa_model = model.clone();
        swa_model.params = avg.clone();
        swa_model.recompute_bn_stats(x_train.view())?;
        swa_model.mode = Mode::Eval;
        let (rmse, _) = val_metrics(&swa_model, x_val.view(), &y_val)?;
        swa_val_rmse = Some(rmse);
        if rmse <= best_rmse {
            chosen = swa_model;
            selected = Selected::Swa;
        }
    }
    chosen.mode = Mode::Eval;
    Ok(TrainOutcome {
        model: chosen,
        log: TrainLog {
            epochs,
            best_epoch,
            best_val_rmse: best_rmse,
            swa_val_rmse,
            selected,
        },
        train_indices: train_idx,
        val_indices: val_idx,
    })
}
