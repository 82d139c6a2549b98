//! Seed derivation for reproducible, thread-count independent randomness.
//!
//! Every random stream in the crate is a [`SeededRng`] built from a base seed
//! and a short path of integer labels (trial chunk, user, video, ...). Two
//! streams with different paths are statistically independent, and the value
//! of a stream never depends on which thread draws from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `labels` into `base`. Stable across platforms and releases.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(base), |acc, &label| {
        splitmix64(acc ^ splitmix64(label.wrapping_add(GOLDEN)))
    })
}

/// Generator for the stream identified by `(base, labels)`.
pub fn stream(base: u64, labels: &[u64]) -> SeededRng {
    SeededRng::seed_from_u64(derive_seed(base, labels))
}

/// Stable label for a real-valued parameter such as a noise scale.
pub fn label_f64(value: f64) -> u64 {
    // Normalise -0.0 so that it maps to the same stream as 0.0.
    if value == 0.0 {
        0
    } else {
        value.to_bits()
    }
}
