//! GF(2^8) arithmetic over the reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Scalar operations go through log/antilog tables. The slice kernels used by
//! the encoder and the Gauss-Jordan decoder ([`axpy`], [`scale`]) use a full
//! 256x256 product table, or nibble-split shuffle tables when the CPU has
//! SSSE3/AVX2.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};

use thiserror::Error;

/// Reduction polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse in GF(2^8)")]
    ZeroInverse,
}

const fn build_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    exp[510] = exp[0];
    exp[511] = exp[1];
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = build_tables();
static EXP: [u8; 512] = TABLES.0;
static LOG: [u8; 256] = TABLES.1;

const fn build_mul_table() -> [[u8; 256]; 256] {
    let (exp, log) = build_tables();
    let mut t = [[0u8; 256]; 256];
    let mut a = 1;
    while a < 256 {
        let mut b = 1;
        while b < 256 {
            t[a][b] = exp[log[a] as usize + log[b] as usize];
            b += 1;
        }
        a += 1;
    }
    t
}

static MUL: [[u8; 256]; 256] = build_mul_table();

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    pub fn inv(self) -> Result<Gf256, FieldError> {
        inv(self.0).map(Gf256)
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(add(self.0, rhs.0))
    }
}

// Addition in characteristic 2 is XOR.
#[allow(clippy::suspicious_op_assign_impl)]
impl AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(mul(self.0, rhs.0))
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        self.0 = mul(self.0, rhs.0);
    }
}

#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
}

pub fn inv(a: u8) -> Result<u8, FieldError> {
    if a == 0 {
        return Err(FieldError::ZeroInverse);
    }
    Ok(EXP[255 - LOG[a as usize] as usize])
}

/// `a / b`; panics when `b` is zero.
#[inline]
pub fn div(a: u8, b: u8) -> u8 {
    assert_ne!(b, 0, "division by zero in GF(2^8)");
    if a == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + 255 - LOG[b as usize] as usize]
}

/// `dst[i] ^= c * src[i]` for every `i`.
///
/// Panics when the slices differ in length.
pub fn axpy(dst: &mut [u8], src: &[u8], c: u8) {
    assert_eq!(dst.len(), src.len(), "axpy operands differ in length");
    match c {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        _ => kernel::axpy(dst, src, c),
    }
}

/// `buf[i] = c * buf[i]` for every `i`.
pub fn scale(buf: &mut [u8], c: u8) {
    match c {
        0 => buf.fill(0),
        1 => {}
        _ => kernel::scale(buf, c),
    }
}

/// Table-only implementations; the reference the vector paths are checked against.
pub mod scalar {
    use super::MUL;

    pub fn axpy(dst: &mut [u8], src: &[u8], c: u8) {
        let row = &MUL[c as usize];
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= row[*s as usize];
        }
    }

    pub fn scale(buf: &mut [u8], c: u8) {
        let row = &MUL[c as usize];
        for b in buf {
            *b = row[*b as usize];
        }
    }
}

fn nibble_tables(c: u8) -> ([u8; 16], [u8; 16]) {
    let row = &MUL[c as usize];
    let mut lo = [0u8; 16];
    let mut hi = [0u8; 16];
    for i in 0..16 {
        lo[i] = row[i];
        hi[i] = row[i << 4];
    }
    (lo, hi)
}

#[cfg(target_arch = "x86_64")]
mod kernel {
    use super::{nibble_tables, scalar};
    use std::arch::x86_64::*;

    const MIN_VECTOR_LEN: usize = 32;

    pub fn axpy(dst: &mut [u8], src: &[u8], c: u8) {
        if dst.len() >= MIN_VECTOR_LEN {
            if is_x86_feature_detected!("avx2") {
                // SAFETY: feature checked at runtime.
                return unsafe { axpy_avx2(dst, src, c) };
            }
            if is_x86_feature_detected!("ssse3") {
                // SAFETY: feature checked at runtime.
                return unsafe { axpy_ssse3(dst, src, c) };
            }
        }
        scalar::axpy(dst, src, c)
    }

    pub fn scale(buf: &mut [u8], c: u8) {
        if buf.len() >= MIN_VECTOR_LEN && is_x86_feature_detected!("ssse3") {
            // SAFETY: feature checked at runtime.
            return unsafe { scale_ssse3(buf, c) };
        }
        scalar::scale(buf, c)
    }

    #[target_feature(enable = "avx2")]
    unsafe fn axpy_avx2(dst: &mut [u8], src: &[u8], c: u8) {
        let (lo, hi) = nibble_tables(c);
        let n = dst.len() / 32 * 32;
        unsafe {
            let lo128 = _mm_loadu_si128(lo.as_ptr() as *const __m128i);
            let hi128 = _mm_loadu_si128(hi.as_ptr() as *const __m128i);
            let tlo = _mm256_broadcastsi128_si256(lo128);
            let thi = _mm256_broadcastsi128_si256(hi128);
            let mask = _mm256_set1_epi8(0x0f);
            let mut i = 0;
            while i < n {
                let s = _mm256_loadu_si256(src.as_ptr().add(i) as *const __m256i);
                let d = _mm256_loadu_si256(dst.as_ptr().add(i) as *const __m256i);
                let l = _mm256_shuffle_epi8(tlo, _mm256_and_si256(s, mask));
                let h = _mm256_shuffle_epi8(thi, _mm256_and_si256(_mm256_srli_epi64(s, 4), mask));
                let r = _mm256_xor_si256(d, _mm256_xor_si256(l, h));
                _mm256_storeu_si256(dst.as_mut_ptr().add(i) as *mut __m256i, r);
                i += 32;
            }
        }
        scalar::axpy(&mut dst[n..], &src[n..], c);
    }

    #[target_feature(enable = "ssse3")]
    unsafe fn axpy_ssse3(dst: &mut [u8], src: &[u8], c: u8) {
        let (lo, hi) = nibble_tables(c);
        let n = dst.len() / 16 * 16;
        unsafe {
            let tlo = _mm_loadu_si128(lo.as_ptr() as *const __m128i);
            let thi = _mm_loadu_si128(hi.as_ptr() as *const __m128i);
            let mask = _mm_set1_epi8(0x0f);
            let mut i = 0;
            while i < n {
                let s = _mm_loadu_si128(src.as_ptr().add(i) as *const __m128i);
                let d = _mm_loadu_si128(dst.as_ptr().add(i) as *const __m128i);
                let l = _mm_shuffle_epi8(tlo, _mm_and_si128(s, mask));
                let h = _mm_shuffle_epi8(thi, _mm_and_si128(_mm_srli_epi64(s, 4), mask));
                let r = _mm_xor_si128(d, _mm_xor_si128(l, h));
                _mm_storeu_si128(dst.as_mut_ptr().add(i) as *mut __m128i, r);
                i += 16;
            }
        }
        scalar::axpy(&mut dst[n..], &src[n..], c);
    }

    #[target_feature(enable = "ssse3")]
    unsafe fn scale_ssse3(buf: &mut [u8], c: u8) {
        let (lo, hi) = nibble_tables(c);
        let n = buf.len() / 16 * 16;
        unsafe {
            let tlo = _mm_loadu_si128(lo.as_ptr() as *const __m128i);
            let thi = _mm_loadu_si128(hi.as_ptr() as *const __m128i);
            let mask = _mm_set1_epi8(0x0f);
            let mut i = 0;
            while i < n {
                let s = _mm_loadu_si128(buf.as_ptr().add(i) as *const __m128i);
                let l = _mm_shuffle_epi8(tlo, _mm_and_si128(s, mask));
                let h = _mm_shuffle_epi8(thi, _mm_and_si128(_mm_srli_epi64(s, 4), mask));
                _mm_storeu_si128(buf.as_mut_ptr().add(i) as *mut __m128i, _mm_xor_si128(l, h));
                i += 16;
            }
        }
        scalar::scale(&mut buf[n..], c);
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod kernel {
    pub use super::scalar::{axpy, scale};
}
