//! SRCC, PLCC, KRCC and RMSE, plus the repeated-split evaluation harness.
//!
//! Ties get fractional (averaged) ranks for SRCC and the tau-b correction
//! for KRCC. Medians over repeats are taken per metric.

use serde::Serialize;

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], truth: &[f64], min: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < min {
        return Err(Error::UndefinedCorrelation("too few samples"));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

/// Fractional ranks starting at 1; tied values share their mean rank.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn plcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    pearson(pred, truth)
}

pub fn srcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    pearson(&fractional_ranks(pred), &fractional_ranks(truth))
}

/// Merge sort that counts inversions (pairs out of order, ties excluded).
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Sum of `k(k-1)/2` over runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall tau-b via Knight's `O(n log n)` algorithm.
pub fn krcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let n = pred.len() as u64;
    let mut pairs: Vec<(f64, f64)> = truth.iter().copied().zip(pred.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = n * (n - 1) / 2;
    let tied_x = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let tied_xy = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(ys.len());
    let discordant = count_inversions(&mut ys, &mut scratch);
    let tied_y = tied_pairs(&ys);

    if tied_x == total || tied_y == total {
        return Err(Error::UndefinedCorrelation("all pairs tied"));
    }
    // concordant - discordant = total - tied_x - tied_y + tied_xy - 2·discordant
    let diff = total as i128 - tied_x as i128 - tied_y as i128 + tied_xy as i128
        - 2 * discordant as i128;
    let denom = (((total - tied_x) as f64) * ((total - tied_y) as f64)).sqrt();
    Ok((diff as f64 / denom).clamp(-1.0, 1.0))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub rmse: f64,
    pub n: usize,
    pub repeat_index: usize,
}

impl EvalResult {
    pub fn compute(pred: &[f64], truth: &[f64], repeat_index: usize) -> Result<Self> {
        Ok(Self {
            srcc: srcc(pred, truth)?,
            plcc: plcc(pred, truth)?,
            krcc: krcc(pred, truth)?,
            rmse: rmse(pred, truth)?,
            n: pred.len(),
            repeat_index,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Per-metric medians; `repeat_index` of the result is meaningless and set
/// to `usize::MAX`.
pub fn median_result(results: &[EvalResult]) -> Result<EvalResult> {
    if results.is_empty() {
        return Err(Error::Contract("no results to summarise".into()));
    }
    let pick = |f: fn(&EvalResult) -> f64| median(&results.iter().map(f).collect::<Vec<_>>());
    Ok(EvalResult {
        srcc: pick(|r| r.srcc),
        plcc: pick(|r| r.plcc),
        krcc: pick(|r| r.krcc),
        rmse: pick(|r| r.rmse),
        n: results[0].n,
        repeat_index: usize::MAX,
    })
}

pub const DEFAULT_REPEATS: usize = 21;

#[derive(Debug, Clone, Serialize)]
pub struct RepeatedEval {
    pub median: EvalResult,
    pub runs: Vec<EvalResult>,
}

impl RepeatedEval {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,n,srcc,plcc,krcc,rmse\n");
        let rows = self
            .runs
            .iter()
            .map(|r| (r.repeat_index.to_string(), r))
            .chain(std::iter::once(("median".to_string(), &self.median)));
        for (label, r) in rows {
            out.push_str(&format!(
                "{label},{},{},{},{},{}\n",
                r.n, r.srcc, r.plcc, r.krcc, r.rmse
            ));
        }
        out
    }
}

/// Runs `run(repeat_index)` for every repeat and reports per-metric medians.
/// Each repeat is independent; they run in parallel when the `parallel`
/// feature is on, and results are ordered by repeat index either way.
pub fn repeated<F>(repeats: usize, run: F) -> Result<RepeatedEval>
where
    F: Fn(usize) -> Result<EvalResult> + Sync,
{
    if repeats == 0 {
        return Err(Error::Config("repeats must be ≥ 1".into()));
    }
    #[cfg(feature = "parallel")]
    let runs: Vec<EvalResult> = {
        use rayon::prelude::*;
        (0..repeats).into_par_iter().map(&run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<EvalResult> = (0..repeats).map(&run).collect::<Result<_>>()?;
    Ok(RepeatedEval {
        median: median_result(&runs)?,
        runs,
    })
}
