//! Reproducible per-path random number streams.
//!
//! Every path owns an independent ChaCha stream addressed by
//! `(seed, path_index)`. The mapping is pure: the same pair always yields the
//! same stream, no matter how many paths run, in what order, or on how many
//! workers. Estimators built on common random numbers (finite-difference
//! sensitivities, paired residuals) rely on replaying a stream exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// RNG stream for one simulated path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Derive a fresh base seed from `seed` and a tag list (splitmix64 folding).
///
/// Used by nested estimators so that inner simulations get streams
/// independent of every outer stream while staying fully deterministic.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed;
    for &t in tags {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(t);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Draw one standard normal from the stream.
#[inline]
pub(crate) fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Brownian increments for one path: `n_steps` i.i.d. N(0, dt * I) vectors in
/// R^d, returned flat (step-major). Fully determined by `(seed, path_index)`.
pub fn brownian_increments(
    seed: u64,
    path_index: u64,
    n_steps: usize,
    dt: f64,
    dim: usize,
) -> Vec<f64> {
    assert!(n_steps >= 1, "n_steps must be >= 1");
    assert!(dt > 0.0, "dt must be positive");
    let mut rng = path_rng(seed, path_index);
    let sqrt_dt = dt.sqrt();
    (0..n_steps * dim)
        .map(|_| sqrt_dt * draw_normal(&mut rng))
        .collect()
}
