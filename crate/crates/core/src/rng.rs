//! Seed derivation and Gaussian sampling.
//!
//! Every random draw in the toolkit comes from a [`ChaCha8Rng`] seeded through
//! [`derive_seed`], so an experiment is a pure function of its base seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type AuditRng = ChaCha8Rng;

/// Independent randomness roles inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Partition = 2,
    Mechanism = 3,
    RegressorInit = 4,
    Holdout = 5,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Split a parent seed into a child seed for `index`.
///
/// `derive_seed(s, i) = mix64(mix64(s) ^ mix64(i + 1))`; distinct indices give
/// statistically independent children.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ mix64(index.wrapping_add(1)))
}

/// Seed of trial `trial` under `base_seed`.
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    derive_seed(base_seed, trial)
}

/// Generator for one role of one trial.
pub fn stream_rng(trial_seed: u64, stream: Stream) -> AuditRng {
    AuditRng::seed_from_u64(derive_seed(trial_seed, 0x5354_5245_414D_0000 | stream as u64))
}

pub fn seeded(seed: u64) -> AuditRng {
    AuditRng::seed_from_u64(seed)
}

/// One standard normal draw by Box–Muller (the second variate is discarded).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean + sd * standard_normal(rng)
}
