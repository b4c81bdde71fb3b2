//! No-reference video quality assessment built on inter-frame patch
//! differences.
//!
//! The pipeline runs frame pairs through [`fragmentation`], groups the
//! resulting triplets with [`chunking`], turns chunks into fused feature
//! vectors with [`features`], and regresses a quality score with the MLP in
//! [`regressor`]. [`metrics`] implements the correlation-based evaluation.

pub mod bench;
pub mod buffer;
pub mod chunking;
pub mod config;
pub mod error;
pub mod features;
pub mod fragmentation;
pub mod frame_io;
pub mod metrics;
pub mod pipeline;
pub mod regressor;
pub mod synth;

pub use buffer::RgbBuffer;
pub use error::{Error, ErrorKind, Result};
