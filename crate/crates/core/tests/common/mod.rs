//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

/// Carry-less multiply with reduction by 0x11D after every shift.
pub fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1D;
        }
        b >>= 1;
    }
    p
}

/// Inverse by exhaustive search.
pub fn gf_inv(a: u8) -> Option<u8> {
    (1..=255u8).find(|&b| gf_mul(a, b) == 1)
}

/// Rank of a coefficient matrix by plain Gaussian elimination.
pub fn rank(rows: &[Vec<u8>]) -> usize {
    let mut m: Vec<Vec<u8>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, p);
        let inv = gf_inv(m[r][c]).unwrap();
        for x in m[r].iter_mut() {
            *x = gf_mul(*x, inv);
        }
        for i in 0..m.len() {
            if i != r && m[i][c] != 0 {
                let f = m[i][c];
                let pivot = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot) {
                    *x ^= gf_mul(f, *y);
                }
            }
        }
        r += 1;
    }
    r
}

/// Solves `coeffs · X = data` for `X` when `coeffs` has full column rank,
/// using only the first independent rows. Returns `None` if rank-deficient.
pub fn solve(coeffs: &[Vec<u8>], data: &[Vec<u8>]) -> Option<Vec<Vec<u8>>> {
    let n = coeffs.first()?.len();
    let mut m: Vec<Vec<u8>> = coeffs
        .iter()
        .zip(data)
        .map(|(c, d)| c.iter().chain(d).copied().collect())
        .collect();
    for c in 0..n {
        let p = (c..m.len()).find(|&i| m[i][c] != 0)?;
        m.swap(c, p);
        let inv = gf_inv(m[c][c]).unwrap();
        for x in m[c].iter_mut() {
            *x = gf_mul(*x, inv);
        }
        for i in 0..m.len() {
            if i != c && m[i][c] != 0 {
                let f = m[i][c];
                let pivot = m[c].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot) {
                    *x ^= gf_mul(f, *y);
                }
            }
        }
    }
    Some(m[..n].iter().map(|r| r[n..].to_vec()).collect())
}

/// Linear combination `Σ c_i · seg_i`.
pub fn combine(coeffs: &[u8], segments: &[Vec<u8>]) -> Vec<u8> {
    let mut out = vec![0u8; segments[0].len()];
    for (&c, s) in coeffs.iter().zip(segments) {
        for (o, &b) in out.iter_mut().zip(s) {
            *o ^= gf_mul(c, b);
        }
    }
    out
}

/// First draws of the coefficient PRNG, computed straight from the recurrence.
pub fn prng_coefficients(seed: u16, n: usize) -> Vec<u8> {
    let mut a = u32::from(seed) % 32749;
    (0..n)
        .map(|_| {
            a = (a * 32719 + 3) % 32749;
            ((a % 255) + 1) as u8
        })
        .collect()
}
