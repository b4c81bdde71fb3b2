//! `DVQF` feature files.
//!
//! ```text
//! "DVQF" | u32 version | u32 dim | u32 video_count
//! per video: u32 id_len | id (UTF-8) | dim × f32
//! ```
//! All integers and floats are little-endian. A JSON sidecar
//! (`<file>.json`) maps each id to `{path, mos, chunk_count, backend_id, config_hash}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DVQF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvqfFile {
    pub dim: usize,
    pub records: Vec<FeatureRecord>,
}

impl DvqfFile {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.iter().any(|r| r.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&FeatureRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Appends a record; returns `false` (and leaves the file alone) when the
    /// id is already present.
    pub fn push(&mut self, id: impl Into<String>, values: Vec<f32>) -> Result<bool> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::Shape(format!(
                "feature for '{id}' has {} values, file dim is {}",
                values.len(),
                self.dim
            )));
        }
        if self.contains(&id) {
            return Ok(false);
        }
        self.records.push(FeatureRecord { id, values });
        Ok(true)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.records.len() * (8 + self.dim * 4));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.id.len() as u32).to_le_bytes());
            out.extend_from_slice(r.id.as_bytes());
            for v in &r.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: "missing DVQF magic".into(),
            });
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Unsupported(format!("DVQF version {version}")));
        }
        let dim = cur.u32()? as usize;
        let count = cur.u32()? as usize;
        let mut file = DvqfFile::new(dim);
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let at = cur.pos;
            let id = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::Parse {
                    offset: at as u64,
                    message: "video id is not UTF-8".into(),
                })?
                .to_owned();
            let raw = cur.take(dim * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
                .collect();
            file.records.push(FeatureRecord { id, values });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Parse {
                offset: cur.pos as u64,
                message: "trailing bytes after last record".into(),
            });
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Parse {
                offset: self.bytes.len() as u64,
                message: format!("unexpected end of file, needed {n} more bytes"),
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub path: String,
    pub mos: Option<f64>,
    pub chunk_count: usize,
    #[serde(default)]
    pub backend_id: String,
    #[serde(default)]
    pub config_hash: String,
}

pub fn sidecar_path(features: &Path) -> PathBuf {
    let mut s = features.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, SidecarEntry>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_sidecar(path: &Path, entries: &BTreeMap<String, SidecarEntry>) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(entries).expect("plain map");
    text.push(b'\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_round_trip(
            dim in 0usize..6,
            ids in proptest::collection::btree_set("[a-z0-9_é]{0,8}", 0..5),
            seed in any::<u32>(),
        ) {
            let mut file = DvqfFile::new(dim);
            for (k, id) in ids.iter().enumerate() {
                let values = (0..dim).map(|j| (seed as f32) * 0.5 - (k * 7 + j) as f32).collect();
                file.push(id.clone(), values).unwrap();
            }
            let back = DvqfFile::from_bytes(&file.to_bytes()).unwrap();
            prop_assert_eq!(back, file);
        }
    }

    #[test]
    fn header_layout() {
        let mut f = DvqfFile::new(2);
        f.push("ab", vec![1.0, -2.0]).unwrap();
        let b = f.to_bytes();
        assert_eq!(&b[..4], b"DVQF");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 1);
        assert_eq!(&b[20..22], b"ab");
        assert_eq!(f32::from_le_bytes(b[26..30].try_into().unwrap()), -2.0);
        assert_eq!(b.len(), 30);
    }

    #[test]
    fn duplicates_and_bad_dims() {
        let mut f = DvqfFile::new(1);
        assert!(f.push("a", vec![1.0]).unwrap());
        assert!(!f.push("a", vec![2.0]).unwrap());
        assert_eq!(f.get("a").unwrap().values, vec![1.0]);
        assert!(matches!(f.push("b", vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn corrupt_input() {
        assert!(DvqfFile::from_bytes(b"NOPE").is_err());
        let mut f = DvqfFile::new(3);
        f.push("x", vec![0.0; 3]).unwrap();
        let b = f.to_bytes();
        assert!(matches!(DvqfFile::from_bytes(&b[..b.len() - 1]), Err(Error::Parse { .. })));
        let empty = DvqfFile::new(9984).to_bytes();
        assert_eq!(DvqfFile::from_bytes(&empty).unwrap().records.len(), 0);
    }
}
