//! Seeded RNG construction, stream splitting, and categorical sampling.
//!
//! Every randomized operation in this crate takes either an explicit seed or
//! an RNG created here, so results replay exactly. Concurrent chains draw
//! from independent streams of the same root seed rather than from offset
//! seeds, which keeps streams uncorrelated regardless of how many are split.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for a root seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator with root seed `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a path of indices.
///
/// Used to give every cell of an experiment sweep its own replayable seed.
/// Stable across platforms and releases (unlike `DefaultHasher`).
pub fn mix_seed(root: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(root);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p));
    }
    s
}

/// Draws an index with probability `weights[i] / total`.
///
/// `total` must be the sum of `weights` and strictly positive.
pub(crate) fn sample_weighted<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    debug_assert!(total > 0.0);
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Float roundoff can leave u marginally above the final accumulator.
    weights.len() - 1
}

/// Draws an index from a normalized probability vector.
pub(crate) fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    sample_weighted(rng, probs, 1.0)
}
