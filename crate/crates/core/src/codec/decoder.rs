use crate::gf256;

/// Progressive Gauss-Jordan workspace for one coding block.
///
/// Rows are augmented `[coefficients | segment]` vectors kept in reduced
/// row-echelon form and stored under their pivot column. A received row that
/// reduces to zero carries no new degree of freedom and is dropped.
#[derive(Debug, Clone)]
pub struct DecoderState {
    segments: usize,
    segment_len: usize,
    rows: Vec<Option<Vec<u8>>>,
    rank: usize,
}

impl DecoderState {
    pub fn new(segments: usize, segment_len: usize) -> Self {
        DecoderState {
            segments,
            segment_len,
            rows: vec![None; segments],
            rank: 0,
        }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_decoded(&self) -> bool {
        self.rank == self.segments
    }

    /// Adds one received packet. Returns `true` when it raised the rank.
    pub fn ingest(&mut self, coeffs: &[u8], payload: &[u8]) -> bool {
        assert_eq!(coeffs.len(), self.segments, "coefficient vector length");
        assert_eq!(payload.len(), self.segment_len, "segment length");
        if self.is_decoded() {
            return false;
        }
        let mut row = Vec::with_capacity(self.segments + self.segment_len);
        row.extend_from_slice(coeffs);
        row.extend_from_slice(payload);
        self.insert(row)
    }

    /// Shortcut for an uncoded segment.
    pub fn ingest_systematic(&mut self, index: usize, payload: &[u8]) -> bool {
        assert!(index < self.segments);
        assert_eq!(payload.len(), self.segment_len, "segment length");
        if self.rows[index].is_some() || self.is_decoded() {
            return false;
        }
        let mut row = vec![0u8; self.segments + self.segment_len];
        row[index] = 1;
        row[self.segments..].copy_from_slice(payload);
        self.insert(row)
    }

    fn insert(&mut self, mut row: Vec<u8>) -> bool {
        let ns = self.segments;
        // Forward reduce against every existing pivot.
        for col in 0..ns {
            let c = row[col];
            if c == 0 {
                continue;
            }
            if let Some(pivot_row) = &self.rows[col] {
                // Pivot rows are zero left of their pivot column.
                gf256::axpy(&mut row[col..], &pivot_row[col..], c);
            }
        }
        let Some(pivot) = row[..ns].iter().position(|&c| c != 0) else {
            return false;
        };
        let inv = gf256::inv(row[pivot]).expect("pivot is nonzero");
        gf256::scale(&mut row[pivot..], inv);
        // Back-substitute the new pivot out of the other rows.
        for other in self.rows.iter_mut().flatten() {
            let c = other[pivot];
            if c != 0 {
                gf256::axpy(&mut other[pivot..], &row[pivot..], c);
            }
        }
        self.rows[pivot] = Some(row);
        self.rank += 1;
        true
    }

    /// Segment `index` if its row has been reduced to a unit vector.
    pub fn segment(&self, index: usize) -> Option<&[u8]> {
        let row = self.rows.get(index)?.as_ref()?;
        let unit = row[..self.segments]
            .iter()
            .enumerate()
            .all(|(j, &c)| c == u8::from(j == index));
        unit.then(|| &row[self.segments..])
    }

    /// Concatenated segments once the block is fully decoded.
    pub fn decoded_payload(&self) -> Option<Vec<u8>> {
        if !self.is_decoded() {
            return None;
        }
        let mut out = Vec::with_capacity(self.segments * self.segment_len);
        for row in self.rows.iter().flatten() {
            out.extend_from_slice(&row[self.segments..]);
        }
        Some(out)
    }

    /// Coefficient halves of the stored rows, in pivot order.
    pub fn coefficient_rows(&self) -> impl Iterator<Item = (usize, &[u8])> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(move |(pivot, r)| r.as_deref().map(|r| (pivot, &r[..self.segments])))
    }

    /// Reduced row-echelon check on the coefficient part.
    pub fn is_rref(&self) -> bool {
        let pivots: Vec<usize> = self.coefficient_rows().map(|(p, _)| p).collect();
        self.coefficient_rows().all(|(p, coeffs)| {
            coeffs[p] == 1
                && coeffs[..p].iter().all(|&c| c == 0)
                && pivots.iter().all(|&q| q == p || coeffs[q] == 0)
        })
    }
}
