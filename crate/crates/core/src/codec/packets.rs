use super::{CodecError, DecoderState};
use crate::framing::datagram::total_len;

/// Splits a decoded, unpadded block back into its packets by walking the
/// IPv4 total-length fields.
pub fn reassemble_packets(block: &[u8]) -> Result<Vec<Vec<u8>>, CodecError> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < block.len() {
        let n = total_len(&block[at..]).ok_or(CodecError::BadBoundary {
            offset: at,
            reason: "no IPv4 header at packet boundary",
        })?;
        if at + n > block.len() {
            return Err(CodecError::BadBoundary {
                offset: at,
                reason: "packet runs past the end of the block",
            });
        }
        out.push(block[at..at + n].to_vec());
        at += n;
    }
    Ok(out)
}

/// Recovers whole packets from an undecodable block.
///
/// `starts[i]` is the start field of segment `i` if its systematic packet
/// arrived. Parsing begins at a known start, then follows length fields; a
/// packet is returned only if every byte of it lies in a recovered segment.
pub fn extract_systematic(state: &DecoderState, starts: &[Option<u16>]) -> Vec<Vec<u8>> {
    let ns = state.segments();
    let ls = state.segment_len();
    let total = ns * ls;
    let have = |lo: usize, hi: usize| {
        hi <= total && (lo / ls..hi.div_ceil(ls)).all(|i| state.segment(i).is_some())
    };
    let read = |lo: usize, hi: usize| {
        let mut v = Vec::with_capacity(hi - lo);
        let mut p = lo;
        while p < hi {
            let seg = state.segment(p / ls).expect("range checked");
            let off = p % ls;
            let take = (ls - off).min(hi - p);
            v.extend_from_slice(&seg[off..off + take]);
            p += take;
        }
        v
    };

    let mut out = Vec::new();
    let mut next_seg = 0;
    let mut cursor: Option<usize> = None;
    loop {
        let c = match cursor {
            Some(c) => c,
            None => {
                let found = (next_seg..ns).find_map(|j| {
                    let s = (*starts.get(j)?)?;
                    (state.segment(j).is_some() && usize::from(s) < ls)
                        .then_some(j * ls + usize::from(s))
                });
                match found {
                    Some(c) => c,
                    None => break,
                }
            }
        };
        let ipv4 = crate::framing::IPV4_HEADER_LEN;
        let len = if have(c, c + ipv4) {
            total_len(&read(c, c + ipv4))
        } else {
            None
        };
        match len {
            Some(n) if c + n <= total => {
                if have(c, c + n) {
                    out.push(read(c, c + n));
                }
                cursor = Some(c + n);
            }
            _ => {
                cursor = None;
                next_seg = c / ls + 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CodecParams, CodingBlock};
    use crate::framing::datagram;

    fn receive(block: &CodingBlock, lost: &[usize]) -> (DecoderState, Vec<Option<u16>>) {
        let mut d = DecoderState::new(block.segment_count(), block.segment_len());
        let mut starts = vec![None; block.segment_count()];
        for (i, start) in starts.iter_mut().enumerate() {
            if !lost.contains(&i) {
                d.ingest_systematic(i, block.segment(i));
                *start = block.start_offset(i);
            }
        }
        (d, starts)
    }

    fn params(nr: usize) -> CodecParams {
        CodecParams {
            preferred_segments: nr,
            ..CodecParams::default()
        }
    }

    #[test]
    fn reassemble_examples() {
        let p = datagram::build(1, 100);
        assert_eq!(reassemble_packets(&p).unwrap(), vec![p.clone()]);

        let pkts: Vec<Vec<u8>> = (0..16)
            .map(|i| datagram::build(i, 24 + (i as usize * 97) % 1300))
            .collect();
        let block = CodingBlock::new(0, 0, &pkts, &params(120)).unwrap();
        let unpadded = crate::codec::unpad_block(block.payload()).unwrap();
        assert_eq!(reassemble_packets(unpadded).unwrap(), pkts);

        let mut cut = p.clone();
        cut.truncate(60);
        assert!(matches!(
            reassemble_packets(&cut),
            Err(CodecError::BadBoundary { offset: 0, .. })
        ));
    }

    #[test]
    fn everything_received_extracts_all() {
        let pkts: Vec<Vec<u8>> = (0..5)
            .map(|i| datagram::build(i, 50 + 10 * i as usize))
            .collect();
        let block = CodingBlock::new(0, 0, &pkts, &params(8)).unwrap();
        let (d, starts) = receive(&block, &[]);
        assert_eq!(extract_systematic(&d, &starts), pkts);
    }

    #[test]
    fn lost_tail_segment_drops_only_spanning_packet() {
        // Two packets, 44 + 40 bytes, 1 pad byte -> 5 segments of 17 bytes.
        // Packet 0 covers segments 0-2, packet 1 starts in segment 2 and ends in 4.
        let pkts = vec![datagram::build(10, 44), datagram::build(11, 40)];
        let block = CodingBlock::new(0, 0, &pkts, &params(5)).unwrap();
        assert_eq!(block.segment_len(), 17);
        let (d, starts) = receive(&block, &[4]);
        assert_eq!(extract_systematic(&d, &starts), vec![pkts[0].clone()]);
        let (d, starts) = receive(&block, &[1]);
        assert_eq!(extract_systematic(&d, &starts), vec![pkts[1].clone()]);
    }

    #[test]
    fn resync_after_lost_header() {
        // Three 30-byte packets over 10-byte segments; losing segment 0 loses
        // the first header, and parsing resumes at segment 3's start.
        let pkts: Vec<Vec<u8>> = (0..3).map(|i| datagram::build(i, 30)).collect();
        let block = CodingBlock::new(0, 0, &pkts, &params(10)).unwrap();
        assert_eq!(block.segment_len(), 10);
        let (d, starts) = receive(&block, &[0]);
        assert_eq!(extract_systematic(&d, &starts), pkts[1..].to_vec());
    }

    #[test]
    fn nothing_received_extracts_nothing() {
        let pkts = vec![datagram::build(1, 64)];
        let block = CodingBlock::new(0, 0, &pkts, &params(4)).unwrap();
        let (d, starts) = receive(&block, &[0, 1, 2, 3]);
        assert!(extract_systematic(&d, &starts).is_empty());
    }
}
