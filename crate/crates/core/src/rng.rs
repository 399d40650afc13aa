//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha20 stream, keyed by
//! a 64-bit seed expanded through `SeedableRng::seed_from_u64` and selected
//! by a fixed stream label. Streams are platform independent, so a codebook
//! or trial regenerated from the same seed is bit-identical.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha20Rng;

/// Fixed labels for the independent streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Pilots = 1,
    Spreading = 2,
    Frozen = 3,
    Interleavers = 4,
    Messages = 16,
    Fading = 17,
    Noise = 18,
}

pub fn stream(seed: u64, label: Stream) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in a campaign keyed by `master`.
///
/// The map is a bijection in `trial` for a fixed master seed, so distinct
/// trials never share a stream.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Circularly symmetric complex Gaussian sample with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = libm::sqrt(0.5 * var);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
