use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::prng::{coefficients_from_seed, PRNG_FIXED_POINT, PRNG_MODULUS};
use super::{CodecParams, CodingBlock};
use crate::gf256;

/// Cancellation flag raised when the block being encoded is acknowledged.
#[derive(Debug, Clone, Default)]
pub struct AckSignal(Arc<AtomicBool>);

impl AckSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fire(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_fired(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

/// Supplies the two-byte seeds of coded packets.
pub trait SeedSource {
    /// Called once before the first coded packet of every block.
    fn begin_block(&mut self) {}
    fn next_seed(&mut self) -> u16;
}

impl<S: SeedSource + ?Sized> SeedSource for Box<S> {
    fn begin_block(&mut self) {
        (**self).begin_block()
    }
    fn next_seed(&mut self) -> u16 {
        (**self).next_seed()
    }
}

/// Uniform seeds, never repeated within a block and never the generator's fixed point.
#[derive(Debug, Clone)]
pub struct DistinctSeeds {
    rng: ChaCha8Rng,
    used: Vec<u16>,
}

impl DistinctSeeds {
    pub fn new(seed: u64) -> Self {
        DistinctSeeds {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: Vec::new(),
        }
    }
}

impl SeedSource for DistinctSeeds {
    fn begin_block(&mut self) {
        self.used.clear();
    }

    fn next_seed(&mut self) -> u16 {
        loop {
            let s = self.rng.random_range(0..PRNG_MODULUS) as u16;
            if s != PRNG_FIXED_POINT && !self.used.contains(&s) {
                self.used.push(s);
                return s;
            }
        }
    }
}

/// Seeds 1, 2, 3, ... restarting every block. Handy for fixtures.
#[derive(Debug, Clone, Default)]
pub struct SequentialSeeds {
    next: u16,
}

impl SeedSource for SequentialSeeds {
    fn begin_block(&mut self) {
        self.next = 0;
    }

    fn next_seed(&mut self) -> u16 {
        self.next += 1;
        if self.next == PRNG_FIXED_POINT {
            self.next += 1;
        }
        self.next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionKind {
    /// Uncoded segment `index` (0-based).
    Systematic { index: u8 },
    /// Random combination whose coefficients come from `seed`.
    Coded { seed: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    /// Packet counter within the block.
    pub sid: usize,
    pub kind: EmissionKind,
    /// For systematic segments, offset of the first packet starting inside it.
    pub start: Option<u16>,
    /// Idle time the sender observes before this packet (round boundaries only).
    pub pause_before: Duration,
    pub payload: Vec<u8>,
}

impl Emission {
    /// Coefficient row the receiver reconstructs for this packet.
    pub fn coefficients(&self, segments: usize) -> Vec<u8> {
        match self.kind {
            EmissionKind::Systematic { index } => {
                let mut v = vec![0u8; segments];
                v[index as usize] = 1;
                v
            }
            EmissionKind::Coded { seed } => coefficients_from_seed(seed, segments),
        }
    }
}

/// Emits a block's systematic segments followed by up to `rounds x per_round`
/// coded segments, stopping as soon as the block's [`AckSignal`] fires.
#[derive(Debug)]
pub struct BlockEncoder {
    block: CodingBlock,
    rounds: usize,
    per_round: usize,
    round_interval: Duration,
    ack: AckSignal,
    next_sid: usize,
}

impl BlockEncoder {
    pub fn new(block: CodingBlock, params: &CodecParams, ack: AckSignal) -> Self {
        BlockEncoder {
            block,
            rounds: params.redundancy_rounds,
            per_round: params.redundancy_per_round,
            round_interval: params.round_interval,
            ack,
            next_sid: 0,
        }
    }

    pub fn block(&self) -> &CodingBlock {
        &self.block
    }

    pub fn ack_signal(&self) -> &AckSignal {
        &self.ack
    }

    pub fn emitted(&self) -> usize {
        self.next_sid
    }

    /// Emissions when no acknowledgement ever arrives.
    pub fn planned(&self) -> usize {
        self.block.segment_count() + self.rounds * self.per_round
    }

    pub fn is_finished(&self) -> bool {
        self.ack.is_fired() || self.next_sid >= self.planned()
    }

    /// Pause owed before the next emission: `Tr` at the start of every
    /// redundancy round after the first.
    pub fn pause_before_next(&self) -> Duration {
        let ns = self.block.segment_count();
        match self.next_sid.checked_sub(ns) {
            Some(c) if c > 0 && self.per_round > 0 && c % self.per_round == 0 => {
                self.round_interval
            }
            _ => Duration::ZERO,
        }
    }

    pub fn next_emission(&mut self, seeds: &mut dyn SeedSource) -> Option<Emission> {
        if self.is_finished() {
            return None;
        }
        let ns = self.block.segment_count();
        let pause_before = self.pause_before_next();
        let sid = self.next_sid;
        self.next_sid += 1;

        if sid < ns {
            return Some(Emission {
                sid,
                kind: EmissionKind::Systematic { index: sid as u8 },
                start: self.block.start_offset(sid),
                pause_before: Duration::ZERO,
                payload: self.block.segment(sid).to_vec(),
            });
        }

        if sid == ns {
            seeds.begin_block();
        }
        let seed = seeds.next_seed();
        let coeffs = coefficients_from_seed(seed, ns);
        let mut payload = vec![0u8; self.block.segment_len()];
        for (c, seg) in coeffs.iter().zip(self.block.segments()) {
            gf256::axpy(&mut payload, seg, *c);
        }
        Some(Emission {
            sid,
            kind: EmissionKind::Coded { seed },
            start: None,
            pause_before,
            payload,
        })
    }
}

/// Iterator form of [`BlockEncoder`].
pub struct EncodeIter<'s> {
    encoder: BlockEncoder,
    seeds: &'s mut dyn SeedSource,
}

impl Iterator for EncodeIter<'_> {
    type Item = Emission;

    fn next(&mut self) -> Option<Emission> {
        self.encoder.next_emission(self.seeds)
    }
}

pub fn encode_block<'s>(
    block: CodingBlock,
    params: &CodecParams,
    seeds: &'s mut dyn SeedSource,
    ack: AckSignal,
) -> EncodeIter<'s> {
    EncodeIter {
        encoder: BlockEncoder::new(block, params, ack),
        seeds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(params: &CodecParams) -> CodingBlock {
        let packets: Vec<Vec<u8>> = (0..16u8).map(|i| vec![i; 1400]).collect();
        CodingBlock::new(0, 0, &packets, params).unwrap()
    }

    #[test]
    fn no_redundancy_emits_only_systematic() {
        let params = CodecParams {
            redundancy_rounds: 0,
            ..CodecParams::default()
        };
        let b = block(&params);
        let ns = b.segment_count();
        let mut seeds = SequentialSeeds::default();
        let out: Vec<_> = encode_block(b, &params, &mut seeds, AckSignal::new()).collect();
        assert_eq!(out.len(), ns);
    }

    #[test]
    fn default_nc10_emits_130() {
        let params = CodecParams::default().with_redundancy(10);
        let b = block(&params);
        assert_eq!(b.segment_count(), 120);
        let mut seeds = DistinctSeeds::new(1);
        let out: Vec<_> = encode_block(b.clone(), &params, &mut seeds, AckSignal::new()).collect();
        assert_eq!(out.len(), 130);
        // Systematic prefix: unit vectors in index order.
        for (i, e) in out.iter().take(120).enumerate() {
            assert_eq!(e.kind, EmissionKind::Systematic { index: i as u8 });
            assert_eq!(e.payload, b.segment(i));
        }
        for e in &out[120..] {
            let coeffs = e.coefficients(120);
            let mut expect = vec![0u8; b.segment_len()];
            for (x, c) in coeffs.iter().enumerate() {
                for (d, s) in expect.iter_mut().zip(b.segment(x)) {
                    *d ^= gf256::mul(*c, *s);
                }
            }
            assert_eq!(e.payload, expect);
        }
    }

    #[test]
    fn ack_after_systematic_phase_stops_encoding() {
        let params = CodecParams::default().with_redundancy(40);
        let b = block(&params);
        let ack = AckSignal::new();
        let mut seeds = DistinctSeeds::new(2);
        let mut enc = BlockEncoder::new(b, &params, ack.clone());
        let mut n = 0;
        while enc.next_emission(&mut seeds).is_some() {
            n += 1;
            if n == 120 {
                ack.fire();
            }
        }
        assert_eq!(n, 120);
        assert!(enc.is_finished());
    }

    #[test]
    fn round_pauses() {
        let params = CodecParams {
            redundancy_rounds: 3,
            redundancy_per_round: 2,
            round_interval: Duration::from_millis(5),
            preferred_segments: 4,
            ..CodecParams::default()
        };
        let b = CodingBlock::new(1, 2, &[vec![9u8; 40]], &params).unwrap();
        let mut seeds = SequentialSeeds::default();
        let pauses: Vec<_> = encode_block(b, &params, &mut seeds, AckSignal::new())
            .map(|e| e.pause_before.as_millis())
            .collect();
        assert_eq!(pauses, vec![0, 0, 0, 0, 0, 0, 5, 0, 5, 0]);
    }

    #[test]
    fn distinct_seeds_within_block() {
        let mut s = DistinctSeeds::new(5);
        s.begin_block();
        let mut seen: Vec<u16> = (0..256).map(|_| s.next_seed()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 256);
        assert!(!seen.contains(&PRNG_FIXED_POINT));
    }
}
