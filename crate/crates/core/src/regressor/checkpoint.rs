//! Checkpoint layout: one line of JSON, a newline, then every tensor as
//! little-endian f32 in the order listed in the header.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{InputNorm, MlpModel, Mode, Params, RunningStats};
use crate::error::{Error, Result};

const FORMAT: &str = "fragvqa-mlp";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub hidden: (usize, usize),
    pub dropout: f64,
    pub config_hash: String,
    pub seed: u64,
    pub tensors: Vec<(String, usize)>,
}

fn tensor_list(model: &MlpModel) -> Vec<(&'static str, Vec<f64>)> {
    let p = &model.params;
    let v1 = |a: &Array1<f64>| a.to_vec();
    let v2 = |a: &Array2<f64>| a.iter().copied().collect::<Vec<_>>();
    vec![
        ("norm_mean", v1(&model.norm.mean)),
        ("norm_std", v1(&model.norm.std)),
        ("w1", v2(&p.w1)),
        ("b1", v1(&p.b1)),
        ("gamma1", v1(&p.gamma1)),
        ("beta1", v1(&p.beta1)),
        ("bn1_mean", v1(&model.bn1.mean)),
        ("bn1_var", v1(&model.bn1.var)),
        ("w2", v2(&p.w2)),
        ("b2", v1(&p.b2)),
        ("gamma2", v1(&p.gamma2)),
        ("beta2", v1(&p.beta2)),
        ("bn2_mean", v1(&model.bn2.mean)),
        ("bn2_var", v1(&model.bn2.var)),
        ("w3", v2(&p.w3)),
        ("b3", v1(&p.b3)),
    ]
}

pub fn write_checkpoint<W: Write>(mut out: W, model: &MlpModel, config_hash: &str, seed: u64) -> Result<()> {
    let tensors = tensor_list(model);
    let header = CheckpointHeader {
        format: FORMAT.into(),
        version: VERSION,
        input_dim: model.input_dim(),
        hidden: model.hidden(),
        dropout: model.dropout_p,
        config_hash: config_hash.into(),
        seed,
        tensors: tensors.iter().map(|(n, v)| (n.to_string(), v.len())).collect(),
    };
    let mut line = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    line.push(b'\n');
    out.write_all(&line)?;
    let total: usize = tensors.iter().map(|(_, v)| v.len()).sum();
    let mut blob = Vec::with_capacity(total * 4);
    for (_, values) in &tensors {
        for &v in values {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&blob)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(CheckpointHeader, MlpModel)> {
    let mut reader = BufReader::new(input);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("checkpoint header is not newline-terminated".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint {} v{}",
            header.format, header.version
        )));
    }
    let (d, (h1, h2)) = (header.input_dim, header.hidden);
    if d == 0 || h1 == 0 || h2 == 0 {
        return Err(Error::Format("checkpoint has a zero dimension".into()));
    }
    let mut model = MlpModel::zeros(d, (h1, h2));
    model.dropout_p = header.dropout;
    let expected = tensor_list(&model);
    let names: Vec<(String, usize)> = expected.iter().map(|(n, v)| (n.to_string(), v.len())).collect();
    if names != header.tensors {
        return Err(Error::Format("checkpoint tensor table does not match its dimensions".into()));
    }
    let mut blob = Vec::new();
    reader.read_to_end(&mut blob)?;
    let total: usize = names.iter().map(|(_, n)| n).sum();
    if blob.len() != total * 4 {
        return Err(Error::Format(format!(
            "checkpoint blob has {} bytes, expected {}",
            blob.len(),
            total * 4
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut take1 = |n: usize| Array1::from_iter(values.by_ref().take(n));
    let norm_mean = take1(d);
    let norm_std = take1(d);
    let w1 = take1(h1 * d);
    let b1 = take1(h1);
    let gamma1 = take1(h1);
    let beta1 = take1(h1);
    let bn1 = RunningStats { mean: take1(h1), var: take1(h1) };
    let w2 = take1(h2 * h1);
    let b2 = take1(h2);
    let gamma2 = take1(h2);
    let beta2 = take1(h2);
    let bn2 = RunningStats { mean: take1(h2), var: take1(h2) };
    let w3 = take1(h2);
    let b3 = take1(1);
    let shape = |a: Array1<f64>, r: usize, c: usize| a.into_shape_with_order((r, c)).expect("length checked");
    model.norm = InputNorm { mean: norm_mean, std: norm_std };
    model.params = Params {
        w1: shape(w1, h1, d),
        b1,
        gamma1,
        beta1,
        w2: shape(w2, h2, h1),
        b2,
        gamma2,
        beta2,
        w3: shape(w3, 1, h2),
        b3,
    };
    model.bn1 = bn1;
    model.bn2 = bn2;
    model.mode = Mode::Eval;
    if !model.is_finite() || model.norm.std.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::Format("checkpoint contains non-finite or invalid values".into()));
    }
    Ok((header, model))
}

pub fn save_checkpoint(path: &Path, model: &MlpModel, config_hash: &str, seed: u64) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model, config_hash, seed)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, MlpModel)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}
