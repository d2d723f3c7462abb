//! Counter-based random substreams.
//!
//! Every random draw in the simulator comes from a stream addressed by
//! `(seed, slot, rb, link, index)`. Streams are independent ChaCha8
//! generators, so any subset of trials can be generated in any order (or in
//! parallel) and still produce bit-identical results.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Which kind of randomness a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Link {
    /// BS to direct user `h_k`.
    BsDue = 1,
    /// BS to RIS `G_k`.
    BsRis = 2,
    /// RIS to its own user `f_k`.
    RisRue = 3,
    /// Interference channel from RIS `j` to user `k`.
    Cross = 4,
    /// Transmitted data symbols.
    Symbols = 5,
    /// Receiver noise.
    Noise = 6,
    /// Anything else a Monte Carlo trial needs.
    Trial = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Factory for addressed substreams derived from a single 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    seed: u64,
    key: [u8; 32],
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Returns the generator for one addressed stream.
    pub fn stream(&self, slot: u64, rb: u64, link: Link, index: u64) -> ChaCha8Rng {
        let mut h = splitmix64(slot);
        h = splitmix64(h ^ rb.rotate_left(17));
        h = splitmix64(h ^ (link as u64).rotate_left(41));
        h = splitmix64(h ^ index);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(h);
        rng
    }

    /// Stream for Monte Carlo trial `trial`, independent of all channel
    /// streams.
    pub fn trial(&self, trial: u64) -> ChaCha8Rng {
        self.stream(trial, u64::MAX, Link::Trial, 0)
    }
}

/// Draws a circularly symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
