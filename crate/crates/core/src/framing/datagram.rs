//! Synthetic application datagrams. Each is a minimal IPv4/UDP-shaped packet
//! whose first payload word is a sequence id, so the receiver can tell which
//! packets arrived.

use super::{checksum_rfc1071, IPV4_HEADER_LEN};

pub const MIN_LEN: usize = IPV4_HEADER_LEN + 4;
const UDP: u8 = 17;

pub fn build(id: u32, len: usize) -> Vec<u8> {
    assert!(
        (MIN_LEN..=usize::from(u16::MAX)).contains(&len),
        "datagram length {len} out of range"
    );
    let mut p = vec![0u8; len];
    p[0] = 0x45;
    p[2..4].copy_from_slice(&(len as u16).to_be_bytes());
    p[4..6].copy_from_slice(&(id as u16).to_be_bytes());
    p[8] = 64;
    p[9] = UDP;
    p[12..16].copy_from_slice(&[192, 168, 0, 1]);
    p[16..20].copy_from_slice(&[192, 168, 0, 2]);
    let c = checksum_rfc1071(&p[..IPV4_HEADER_LEN]);
    p[10..12].copy_from_slice(&c.to_be_bytes());
    p[20..24].copy_from_slice(&id.to_be_bytes());
    let mut x = id.wrapping_mul(0x9E37_79B9) | 1;
    for b in &mut p[24..] {
        x ^= x << 13;
        x ^= x >> 17;
        x ^= x << 5;
        *b = x as u8;
    }
    p
}

pub fn id_of(packet: &[u8]) -> Option<u32> {
    let b = packet.get(20..24)?;
    Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Total length declared by an IPv4 header at the front of `buf`.
pub fn total_len(buf: &[u8]) -> Option<usize> {
    if buf.len() < IPV4_HEADER_LEN || buf[0] != 0x45 {
        return None;
    }
    let n = usize::from(u16::from_be_bytes([buf[2], buf[3]]));
    (n >= IPV4_HEADER_LEN).then_some(n)
}
