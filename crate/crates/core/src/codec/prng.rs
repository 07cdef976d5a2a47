/// Modulus of the coefficient generator; states live in `0..PRNG_MODULUS`.
pub const PRNG_MODULUS: u32 = 32_749;
const MULTIPLIER: u32 = 32_719;
const INCREMENT: u32 = 3;

/// The one state the generator maps to itself. Seeding with it yields a
/// constant coefficient vector, so seed sources skip it.
pub const PRNG_FIXED_POINT: u16 = 27_467;

/// Gerhard's linear congruential generator, `a <- (a * 32719 + 3) mod 32749`.
///
/// Encoder and decoder rebuild a coded packet's coefficient vector from the
/// two-byte seed carried in its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prng {
    state: u32,
}

impl Default for Prng {
    fn default() -> Self {
        Prng { state: 1 }
    }
}

impl Prng {
    pub fn from_seed(seed: u16) -> Self {
        Prng {
            state: seed as u32 % PRNG_MODULUS,
        }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    /// Advances the state and returns a value in `1..=lim`.
    pub fn next(&mut self, lim: u32) -> u32 {
        assert!(lim >= 1, "lim must be at least 1");
        self.state = (self.state * MULTIPLIER + INCREMENT) % PRNG_MODULUS;
        self.state % lim + 1
    }
}

/// Coefficients for a coded packet; every entry is nonzero.
pub fn coefficients_from_seed(seed: u16, segments: usize) -> Vec<u8> {
    let mut rng = Prng::from_seed(seed);
    (0..segments).map(|_| rng.next(255) as u8).collect()
}
