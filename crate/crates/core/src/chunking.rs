//! Temporal segmentation of fragment triplets into fixed-length chunks.
//!
//! Chunk `i` starts at triplet `i * stride` and covers `chunk_length`
//! triplets. There are `max(1, floor(n / stride))` chunks; a chunk running
//! past the end of the sequence is truncated and then padded by repeating
//! its last real entry.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::buffer::RgbBuffer;
use crate::error::{Error, Result};
use crate::fragmentation::FragmentTriplet;
use crate::frame_io::VideoMeta;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    AllFrames,
    EveryOtherFrame,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    /// Defaults to the stride.
    pub chunk_length: Option<usize>,
    /// Defaults to the rounded frame rate.
    pub stride: Option<usize>,
    pub sampling: Sampling,
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_length == Some(0) || self.stride == Some(0) {
            return Err(Error::Config("chunk length and stride must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Effective `(stride, chunk_length)` after sampling is applied.
    pub fn resolve(&self, meta: &VideoMeta) -> (usize, usize) {
        let mut stride = self.stride.unwrap_or_else(|| meta.frame_rate.rounded());
        if self.sampling == Sampling::EveryOtherFrame {
            stride = stride.div_ceil(2);
        }
        (stride, self.chunk_length.unwrap_or(stride))
    }
}

/// Index bounds of one chunk over the (sampled) triplet sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSpan {
    pub index: usize,
    pub start: usize,
    pub real: usize,
    pub pad: usize,
}

/// Chunk layout for `available` triplets.
pub fn plan_chunks(available: usize, stride: usize, chunk_length: usize) -> Vec<ChunkSpan> {
    assert!(stride >= 1 && chunk_length >= 1);
    if available == 0 {
        return Vec::new();
    }
    let count = (available / stride).max(1);
    (0..count)
        .map(|index| {
            let start = index * stride;
            let real = chunk_length.min(available - start);
            ChunkSpan {
                index,
                start,
                real,
                pad: chunk_length - real,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ChunkTriplet {
    pub index: usize,
    /// Position of the first entry in the sampled triplet sequence.
    pub start: usize,
    /// `chunk_length` entries; the last `pad_count` share the last real one.
    pub entries: Vec<Arc<FragmentTriplet>>,
    pub pad_count: usize,
}

impl ChunkTriplet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resized(&self) -> Vec<&RgbBuffer> {
        self.entries.iter().map(|t| &t.resized_frame).collect()
    }

    pub fn frag_residuals(&self) -> Vec<&RgbBuffer> {
        self.entries.iter().map(|t| &t.frag_residual).collect()
    }

    pub fn frag_frames(&self) -> Vec<&RgbBuffer> {
        self.entries.iter().map(|t| &t.frag_frame).collect()
    }
}

fn build_chunk(span: ChunkSpan, real: &[Arc<FragmentTriplet>]) -> ChunkTriplet {
    let last = real.last().expect("span has at least one real entry").clone();
    let mut entries = real.to_vec();
    entries.extend(std::iter::repeat_n(last, span.pad));
    ChunkTriplet {
        index: span.index,
        start: span.start,
        entries,
        pad_count: span.pad,
    }
}

/// Drops every second triplet when sampling every other frame.
pub fn apply_sampling<T>(items: Vec<T>, sampling: Sampling) -> Vec<T> {
    match sampling {
        Sampling::AllFrames => items,
        Sampling::EveryOtherFrame => items.into_iter().step_by(2).collect(),
    }
}

pub fn chunk_triplets(
    triplets: Vec<FragmentTriplet>,
    meta: &VideoMeta,
    cfg: &ChunkConfig,
) -> Result<Vec<ChunkTriplet>> {
    cfg.validate()?;
    if triplets.is_empty() {
        return Err(Error::EmptyVideo);
    }
    if triplets.windows(2).any(|w| w[0].source_index >= w[1].source_index) {
        return Err(Error::Contract("triplets must be ordered by source index".into()));
    }
    let (stride, length) = cfg.resolve(meta);
    let sampled: Vec<Arc<FragmentTriplet>> = apply_sampling(triplets, cfg.sampling)
        .into_iter()
        .map(Arc::new)
        .collect();
    Ok(plan_chunks(sampled.len(), stride, length)
        .into_iter()
        .map(|span| build_chunk(span, &sampled[span.start..span.start + span.real]))
        .collect())
}

/// Incremental chunker that emits chunks as soon as their contents and the
/// chunk count are settled, holding only the triplets still needed.
pub struct ChunkStream {
    stride: usize,
    length: usize,
    sampling: Sampling,
    /// Triplets seen before sampling.
    raw_seen: usize,
    /// Sampled triplets seen.
    seen: usize,
    /// Sampled position of `buffer[0]`.
    buffer_start: usize,
    buffer: std::collections::VecDeque<Arc<FragmentTriplet>>,
    next_chunk: usize,
}

impl ChunkStream {
    pub fn new(meta: &VideoMeta, cfg: &ChunkConfig) -> Result<Self> {
        cfg.validate()?;
        let (stride, length) = cfg.resolve(meta);
        Ok(Self {
            stride,
            length,
            sampling: cfg.sampling,
            raw_seen: 0,
            seen: 0,
            buffer_start: 0,
            buffer: Default::default(),
            next_chunk: 0,
        })
    }

    /// Feeds one triplet; returns any chunk that became complete.
    pub fn push(&mut self, triplet: FragmentTriplet) -> Option<ChunkTriplet> {
        let keep = match self.sampling {
            Sampling::AllFrames => true,
            Sampling::EveryOtherFrame => self.raw_seen % 2 == 0,
        };
        self.raw_seen += 1;
        if !keep {
            return None;
        }
        self.buffer.push_back(Arc::new(triplet));
        self.seen += 1;

        // Chunk i exists once (i + 1) * stride triplets have been seen and is
        // full once start + length have been seen.
        let start = self.next_chunk * self.stride;
        let end = start + self.length;
        if self.seen >= (self.next_chunk + 1) * self.stride && self.seen >= end {
            let span = ChunkSpan {
                index: self.next_chunk,
                start,
                real: self.length,
                pad: 0,
            };
            return Some(self.emit(span));
        }
        None
    }

    /// Flushes the remaining chunks at end of stream.
    pub fn finish(mut self) -> Result<Vec<ChunkTriplet>> {
        if self.seen == 0 {
            return Err(Error::EmptyVideo);
        }
        let spans: Vec<_> = plan_chunks(self.seen, self.stride, self.length)
            .into_iter()
            .filter(|s| s.index >= self.next_chunk)
            .collect();
        Ok(spans.into_iter().map(|s| self.emit(s)).collect())
    }

    fn emit(&mut self, span: ChunkSpan) -> ChunkTriplet {
        let lo = span.start - self.buffer_start;
        let real: Vec<_> = self.buffer.range(lo..lo + span.real).cloned().collect();
        let chunk = build_chunk(span, &real);
        self.next_chunk += 1;
        let next_start = self.next_chunk * self.stride;
        while self.buffer_start < next_start && !self.buffer.is_empty() {
            self.buffer.pop_front();
            self.buffer_start += 1;
        }
        chunk
    }
}
