//! Per-block network coding: buffer-list concatenation, segmentation, padding,
//! systematic RLNC encoding with seeded coefficients, and progressive
//! Gauss-Jordan decoding.

mod block;
mod decoder;
mod encoder;
mod packets;
mod prng;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{compute_segmentation, pad_block, unpad_block, CodingBlock, Segmentation};
pub use decoder::DecoderState;
pub use encoder::{
    encode_block, AckSignal, BlockEncoder, DistinctSeeds, Emission, EmissionKind, SeedSource,
    SequentialSeeds,
};
pub use packets::{extract_systematic, reassemble_packets};
pub use prng::{coefficients_from_seed, Prng, PRNG_FIXED_POINT, PRNG_MODULUS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("padding count byte {count} is invalid for a block of {len} bytes")]
    BadPadding { count: u8, len: usize },
    #[error("block needs {0} segments but the header field holds at most 255")]
    TooManySegments(usize),
    #[error("packet boundary at offset {offset} is corrupt: {reason}")]
    BadBoundary { offset: usize, reason: &'static str },
    #[error("invalid codec parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Encoder/decoder tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecParams {
    /// Buffer-list length that triggers a flush (bytes).
    pub buffer_threshold: usize,
    /// Buffer-list age that triggers a flush.
    #[serde(rename = "buffer_interval_ms", with = "crate::time::ms")]
    pub buffer_interval: Duration,
    /// Upper bound on segment length (bytes).
    pub max_segment_len: usize,
    /// Preferred number of segments per block.
    pub preferred_segments: usize,
    /// Redundancy rounds after the systematic phase.
    pub redundancy_rounds: usize,
    /// Coded packets per redundancy round.
    pub redundancy_per_round: usize,
    /// Pause between redundancy rounds.
    #[serde(rename = "round_interval_ms", with = "crate::time::ms")]
    pub round_interval: Duration,
}

impl Default for CodecParams {
    fn default() -> Self {
        CodecParams {
            buffer_threshold: 22_400,
            buffer_interval: Duration::from_secs(1),
            max_segment_len: 1400,
            preferred_segments: 120,
            redundancy_rounds: 1,
            redundancy_per_round: 30,
            round_interval: Duration::ZERO,
        }
    }
}

impl CodecParams {
    pub fn with_redundancy(mut self, per_round: usize) -> Self {
        self.redundancy_per_round = per_round;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |field, reason: &str| {
            Err(CodecError::InvalidParam {
                field,
                reason: reason.to_string(),
            })
        };
        if self.buffer_threshold == 0 {
            return bad("buffer_threshold", "must be at least 1 byte");
        }
        if self.buffer_interval.is_zero() {
            return bad("buffer_interval_ms", "must be positive");
        }
        if self.max_segment_len == 0 {
            return bad("max_segment_len", "must be at least 1 byte");
        }
        if self.preferred_segments == 0 || self.preferred_segments > 255 {
            return bad("preferred_segments", "must be in 1..=255");
        }
        if self.preferred_segments + self.redundancy_rounds * self.redundancy_per_round > 256 {
            return bad(
                "redundancy_per_round",
                "systematic plus redundancy packets must fit the one-byte SID (<= 256)",
            );
        }
        Ok(())
    }
}
