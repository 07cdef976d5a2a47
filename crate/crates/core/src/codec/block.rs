use super::{CodecError, CodecParams};

/// Number and length of the segments a coding block is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segmentation {
    pub segments: usize,
    pub segment_len: usize,
}

impl Segmentation {
    pub fn padded_len(&self) -> usize {
        self.segments * self.segment_len
    }
}

/// Picks the segment count and length for a block of `block_len` bytes.
///
/// One byte is reserved for the padding count, so the padded block always
/// has at least one pad byte. Starting from `preferred` segments, the count
/// grows until the segment length fits under `max_len`.
pub fn compute_segmentation(block_len: usize, preferred: usize, max_len: usize) -> Segmentation {
    assert!(preferred >= 1 && max_len >= 1);
    let len = block_len + 1;
    let mut segments = preferred;
    let mut segment_len = len.div_ceil(segments);
    while segment_len > max_len {
        segments += 1;
        segment_len = len.div_ceil(segments);
    }
    Segmentation {
        segments,
        segment_len,
    }
}

/// ANSI X.923 padding up to `segments * segment_len` bytes. The final byte
/// holds the number of appended bytes, itself included.
pub fn pad_block(payload: &[u8], segments: usize, segment_len: usize) -> Vec<u8> {
    let target = segments * segment_len;
    assert!(
        target > payload.len(),
        "padded length {target} must exceed payload length {}",
        payload.len()
    );
    let pad = target - payload.len();
    assert!(
        pad <= 255,
        "padding of {pad} bytes does not fit the count byte"
    );
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(payload);
    out.resize(target - 1, 0);
    out.push(pad as u8);
    out
}

pub fn unpad_block(padded: &[u8]) -> Result<&[u8], CodecError> {
    let Some(&count) = padded.last() else {
        return Err(CodecError::BadPadding { count: 0, len: 0 });
    };
    let n = count as usize;
    if n == 0 || n > padded.len() {
        return Err(CodecError::BadPadding {
            count,
            len: padded.len(),
        });
    }
    Ok(&padded[..padded.len() - n])
}

/// A concatenated, padded buffer list ready to be coded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingBlock {
    pub tid: u8,
    pub bid: u8,
    payload: Vec<u8>,
    layout: Segmentation,
    /// `(offset, length)` of every original packet in the payload.
    boundaries: Vec<(usize, usize)>,
}

impl CodingBlock {
    pub fn new<P: AsRef<[u8]>>(
        tid: u8,
        bid: u8,
        packets: &[P],
        params: &CodecParams,
    ) -> Result<Self, CodecError> {
        let total: usize = packets.iter().map(|p| p.as_ref().len()).sum();
        let layout = compute_segmentation(total, params.preferred_segments, params.max_segment_len);
        if layout.segments > 255 {
            return Err(CodecError::TooManySegments(layout.segments));
        }
        let mut concat = Vec::with_capacity(layout.padded_len());
        let mut boundaries = Vec::with_capacity(packets.len());
        for p in packets {
            boundaries.push((concat.len(), p.as_ref().len()));
            concat.extend_from_slice(p.as_ref());
        }
        let payload = pad_block(&concat, layout.segments, layout.segment_len);
        Ok(CodingBlock {
            tid,
            bid,
            payload,
            layout,
            boundaries,
        })
    }

    pub fn segmentation(&self) -> Segmentation {
        self.layout
    }

    pub fn segment_count(&self) -> usize {
        self.layout.segments
    }

    pub fn segment_len(&self) -> usize {
        self.layout.segment_len
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn boundaries(&self) -> &[(usize, usize)] {
        &self.boundaries
    }

    pub fn segment(&self, index: usize) -> &[u8] {
        let ls = self.layout.segment_len;
        &self.payload[index * ls..(index + 1) * ls]
    }

    pub fn segments(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.payload.chunks_exact(self.layout.segment_len)
    }

    /// Offset within segment `index` of the first packet that begins there.
    pub fn start_offset(&self, index: usize) -> Option<u16> {
        let ls = self.layout.segment_len;
        let lo = index * ls;
        let hi = lo + ls;
        let pos = self.boundaries.partition_point(|&(off, _)| off < lo);
        match self.boundaries.get(pos) {
            Some(&(off, _)) if off < hi => Some((off - lo) as u16),
            _ => None,
        }
    }
}
