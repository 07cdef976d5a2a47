//! Systematic random linear network coding over GF(2^8) for packet erasure
//! links, with a master/worker encoder-decoder pipeline, a discrete-event
//! lossy-link simulator and an experiment harness.

pub mod channel;
pub mod codec;
pub mod exec;
pub mod framing;
pub mod gf256;
pub mod harness;
pub mod pipeline;
pub mod time;
