//! Wire formats: the NC header on coded and systematic packets, the ACK
//! packet, and the RFC 1071 checksum that protects both.
//!
//! ```text
//!  0              20    21    22    23    24     25..27   27 / 27..29
//! +--------------+-----+-----+-----+-----+------+--------+-------------+
//! | IPv4 header  | tid | bid | sid | ns  | type | start  | segn | seed |
//! +--------------+-----+-----+-----+-----+------+--------+-------------+
//! ```
//!
//! Multi-byte fields are big-endian. The segment length is not stored; it is
//! the IPv4 total length minus the header length.

pub mod datagram;
pub mod golden;

use thiserror::Error;

use crate::codec::{Emission, EmissionKind};

pub const IPV4_HEADER_LEN: usize = 20;
pub const SYSTEMATIC_HEADER_LEN: usize = 28;
pub const CODED_HEADER_LEN: usize = 29;
pub const ACK_LEN: usize = IPV4_HEADER_LEN + 2;

/// IP protocol numbers from the experimental range.
pub const NC_PROTOCOL: u8 = 254;
pub const ACK_PROTOCOL: u8 = 253;

/// `start` value meaning no packet begins inside the segment.
pub const NO_START: u16 = 0xFFFF;

const TYPE_SYSTEMATIC: u8 = 0;
const TYPE_CODED: u8 = 1;
const CHECKSUM_OFFSET: usize = 10;
const TTL: u8 = 64;
const SRC_ADDR: [u8; 4] = [10, 0, 0, 1];
const DST_ADDR: [u8; 4] = [10, 0, 0, 2];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("packet of {len} bytes is shorter than the {need}-byte header")]
    Truncated { len: usize, need: usize },
    #[error("checksum mismatch")]
    BadChecksum,
    #[error("unknown NC packet type {0}")]
    UnknownType(u8),
    #[error("not an IPv4 header with a 20-byte base length")]
    NotIpv4,
    #[error("unexpected IP protocol {0}")]
    WrongProtocol(u8),
    #[error("IPv4 total length {declared} disagrees with {actual} received bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("field {field} value {value} does not fit the wire format")]
    FieldOverflow { field: &'static str, value: usize },
}

/// RFC 1071 internet checksum. Odd-length input is summed as if padded with a zero byte.
pub fn checksum_rfc1071(buf: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    let mut chunks = buf.chunks_exact(2);
    for w in &mut chunks {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Systematic { segn: u8 },
    Coded { seed: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NcHeader {
    pub tid: u8,
    pub bid: u8,
    pub sid: u8,
    pub ns: u8,
    /// Offset of the first packet boundary inside the segment.
    pub start: Option<u16>,
    pub kind: PacketKind,
}

impl NcHeader {
    /// Header for an encoder emission, checking the one-byte field ranges.
    pub fn for_emission(tid: u8, bid: u8, ns: usize, e: &Emission) -> Result<Self, WireError> {
        let ns = u8::try_from(ns).map_err(|_| WireError::FieldOverflow {
            field: "ns",
            value: ns,
        })?;
        let sid = u8::try_from(e.sid).map_err(|_| WireError::FieldOverflow {
            field: "sid",
            value: e.sid,
        })?;
        let kind = match e.kind {
            EmissionKind::Systematic { index } => PacketKind::Systematic { segn: index },
            EmissionKind::Coded { seed } => PacketKind::Coded { seed },
        };
        Ok(NcHeader {
            tid,
            bid,
            sid,
            ns,
            start: e.start,
            kind,
        })
    }

    pub fn header_len(&self) -> usize {
        match self.kind {
            PacketKind::Systematic { .. } => SYSTEMATIC_HEADER_LEN,
            PacketKind::Coded { .. } => CODED_HEADER_LEN,
        }
    }
}

fn write_ipv4(out: &mut [u8], total_len: u16, protocol: u8) {
    out[0] = 0x45;
    out[1] = 0;
    out[2..4].copy_from_slice(&total_len.to_be_bytes());
    out[4..8].fill(0);
    out[8] = TTL;
    out[9] = protocol;
    out[10..12].fill(0);
    out[12..16].copy_from_slice(&SRC_ADDR);
    out[16..20].copy_from_slice(&DST_ADDR);
}

fn seal(wire: &mut [u8]) {
    wire[CHECKSUM_OFFSET..CHECKSUM_OFFSET + 2].fill(0);
    let c = checksum_rfc1071(wire);
    wire[CHECKSUM_OFFSET..CHECKSUM_OFFSET + 2].copy_from_slice(&c.to_be_bytes());
}

fn check_envelope(wire: &[u8], min: usize, protocol: u8) -> Result<(), WireError> {
    if wire.len() < min {
        return Err(WireError::Truncated {
            len: wire.len(),
            need: min,
        });
    }
    if wire[0] != 0x45 {
        return Err(WireError::NotIpv4);
    }
    let declared = usize::from(u16::from_be_bytes([wire[2], wire[3]]));
    if declared != wire.len() {
        return Err(WireError::LengthMismatch {
            declared,
            actual: wire.len(),
        });
    }
    if checksum_rfc1071(wire) != 0 {
        return Err(WireError::BadChecksum);
    }
    if wire[9] != protocol {
        return Err(WireError::WrongProtocol(wire[9]));
    }
    Ok(())
}

/// Builds `header || segment` with the total length and checksum filled in.
/// The checksum covers the whole packet.
pub fn encapsulate(h: &NcHeader, segment: &[u8]) -> Result<Vec<u8>, WireError> {
    let hl = h.header_len();
    let total = hl + segment.len();
    if segment.is_empty() || total > usize::from(u16::MAX) {
        return Err(WireError::FieldOverflow {
            field: "segment length",
            value: segment.len(),
        });
    }
    if h.start == Some(NO_START) || h.start.is_some_and(|s| usize::from(s) >= segment.len()) {
        return Err(WireError::FieldOverflow {
            field: "start",
            value: usize::from(h.start.unwrap_or(NO_START)),
        });
    }
    if let PacketKind::Systematic { segn } = h.kind {
        if segn >= h.ns {
            return Err(WireError::FieldOverflow {
                field: "segn",
                value: usize::from(segn),
            });
        }
    }
    let mut wire = vec![0u8; total];
    write_ipv4(&mut wire, total as u16, NC_PROTOCOL);
    wire[20] = h.tid;
    wire[21] = h.bid;
    wire[22] = h.sid;
    wire[23] = h.ns;
    wire[25..27].copy_from_slice(&h.start.unwrap_or(NO_START).to_be_bytes());
    match h.kind {
        PacketKind::Systematic { segn } => {
            wire[24] = TYPE_SYSTEMATIC;
            wire[27] = segn;
        }
        PacketKind::Coded { seed } => {
            wire[24] = TYPE_CODED;
            wire[27..29].copy_from_slice(&seed.to_be_bytes());
        }
    }
    wire[hl..].copy_from_slice(segment);
    seal(&mut wire);
    Ok(wire)
}

pub fn decapsulate(wire: &[u8]) -> Result<(NcHeader, &[u8]), WireError> {
    check_envelope(wire, SYSTEMATIC_HEADER_LEN, NC_PROTOCOL)?;
    let start = match u16::from_be_bytes([wire[25], wire[26]]) {
        NO_START => None,
        s => Some(s),
    };
    let (kind, hl) = match wire[24] {
        TYPE_SYSTEMATIC => (
            PacketKind::Systematic { segn: wire[27] },
            SYSTEMATIC_HEADER_LEN,
        ),
        TYPE_CODED => {
            if wire.len() < CODED_HEADER_LEN {
                return Err(WireError::Truncated {
                    len: wire.len(),
                    need: CODED_HEADER_LEN,
                });
            }
            let seed = u16::from_be_bytes([wire[27], wire[28]]);
            (PacketKind::Coded { seed }, CODED_HEADER_LEN)
        }
        t => return Err(WireError::UnknownType(t)),
    };
    let h = NcHeader {
        tid: wire[20],
        bid: wire[21],
        sid: wire[22],
        ns: wire[23],
        start,
        kind,
    };
    Ok((h, &wire[hl..]))
}

pub fn encode_ack(tid: u8, bid: u8) -> Vec<u8> {
    let mut wire = vec![0u8; ACK_LEN];
    write_ipv4(&mut wire, ACK_LEN as u16, ACK_PROTOCOL);
    wire[20] = tid;
    wire[21] = bid;
    seal(&mut wire);
    wire
}

pub fn decode_ack(wire: &[u8]) -> Result<(u8, u8), WireError> {
    check_envelope(wire, ACK_LEN, ACK_PROTOCOL)?;
    if wire.len() != ACK_LEN {
        return Err(WireError::LengthMismatch {
            declared: ACK_LEN,
            actual: wire.len(),
        });
    }
    Ok((wire[20], wire[21]))
}

/// Per-packet overhead when the full coefficient vector rides in the header.
pub fn overhead_explicit(header_len: usize, segments: usize, segment_len: usize) -> f64 {
    (header_len + segments) as f64 / segment_len as f64
}

/// Per-packet overhead when only a `seed_len`-byte seed is carried.
pub fn overhead_seeded(header_len: usize, seed_len: usize, segment_len: usize) -> f64 {
    (header_len + seed_len) as f64 / segment_len as f64
}
