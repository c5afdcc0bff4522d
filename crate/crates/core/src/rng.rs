//! Fixed, platform-independent pseudo-random generator and seed derivation.
//!
//! Reproducibility of every sample down to the bit is part of the crate's
//! contract, so the generator is pinned here rather than borrowed from an
//! external crate whose internals may change:
//!
//! * stream generator: xoshiro256++ (Blackman/Vigna), 64-bit output;
//! * state initialization and seed mixing: the SplitMix64 finalizer;
//! * uniform doubles: the top 53 bits of the 64-bit output.
//!
//! Distinct replications and distinct uses of randomness inside one
//! replication get independent streams by hashing `(master seed, grid
//! point, replication, role)` into a fresh 64-bit seed.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function applied to `z`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 sequence generator; used to expand one 64-bit seed into
/// xoshiro state and as the seed-derivation hash.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }
}

/// xoshiro256++ with the reference update rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
}

impl Xoshiro256PlusPlus {
    /// Seed the full 256-bit state from one 64-bit seed via SplitMix64,
    /// the initialization recommended by the generator's authors.
    pub fn from_seed_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Xoshiro256PlusPlus { s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in the half-open interval `[0, 1)`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform double in the half-open interval `(0, 1]`; safe as a log
    /// argument.
    #[inline]
    pub fn next_unit_positive(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Stream roles, so that the edge sampler and any auxiliary randomness of
/// one replication never consume from the same stream.
pub mod role {
    /// Occupied-edge stream of a sample.
    pub const EDGES: u64 = 0x01;
    /// Thinning stream of a monotone coupling.
    pub const COUPLING: u64 = 0x02;
}

/// Derive an independent stream seed from a master seed and a list of
/// context words (grid index, replication index, role, ...).
///
/// Each word is absorbed through the SplitMix64 finalizer, so any change
/// in any word yields an unrelated seed.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    for &w in words {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN)));
    }
    h
}
