//! Mechanisms whose privacy is known exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::estimator::success_probability;
use crate::rng::standard_normal;
use crate::special::normal_cdf;

/// Randomized response on membership bits: each bit is kept with probability
/// `e^ε / (e^ε + 1)` and flipped otherwise, which is exactly ε-DP per bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedResponseMech {
    pub eps_true: f64,
}

/// Adds `N(0, noise_sigma^2)` to each `±1` membership bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCanaryMech {
    pub noise_sigma: f64,
}

impl GaussianCanaryMech {
    /// Gap between an included and an excluded canary's mean output.
    pub const SENSITIVITY: f64 = 2.0;
}

fn check_bits(selection: &[i8]) -> Result<()> {
    if selection.iter().any(|&s| s != 1 && s != -1) {
        return Err(AuditError::Input("membership bits must be +1 or -1".into()));
    }
    Ok(())
}

pub fn rr_release<R: Rng + ?Sized>(selection: &[i8], eps_true: f64, rng: &mut R) -> Result<Vec<i8>> {
    if !(eps_true >= 0.0) {
        return Err(AuditError::Domain(format!("eps_true must be >= 0, got {eps_true}")));
    }
    check_bits(selection)?;
    let keep = success_probability(eps_true, 2);
    Ok(selection
        .iter()
        .map(|&s| if rng.gen::<f64>() < keep { s } else { -s })
        .collect())
}

/// K-ary randomized response: report the true index with probability
/// `e^ε / (e^ε + K - 1)`, otherwise one of the other `K - 1` uniformly.
/// Exactly ε-DP with respect to changing which set member is included.
pub fn rr_release_kary<R: Rng + ?Sized>(
    chosen: &[usize],
    arity: usize,
    eps_true: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(eps_true >= 0.0) {
        return Err(AuditError::Domain(format!("eps_true must be >= 0, got {eps_true}")));
    }
    if arity < 2 || chosen.iter().any(|&u| u >= arity) {
        return Err(AuditError::Input(format!("indices must lie in 0..{arity} with arity >= 2")));
    }
    let keep = success_probability(eps_true, arity as u64);
    Ok(chosen
        .iter()
        .map(|&u| {
            if rng.gen::<f64>() < keep {
                u
            } else {
                let other = rng.gen_range(0..arity - 1);
                if other >= u {
                    other + 1
                } else {
                    other
                }
            }
        })
        .collect())
}

pub fn gaussian_release<R: Rng + ?Sized>(selection: &[i8], noise_sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
        return Err(AuditError::Domain(format!("noise_sigma must be finite and > 0, got {noise_sigma}")));
    }
    check_bits(selection)?;
    Ok(selection
        .iter()
        .map(|&s| f64::from(s) + noise_sigma * standard_normal(rng))
        .collect())
}

/// Smallest δ for which a Gaussian mechanism with the given sensitivity and
/// noise is (ε, δ)-DP:
/// `Φ(Δ/(2σ) - εσ/Δ) - e^ε Φ(-Δ/(2σ) - εσ/Δ)`.
pub fn gaussian_delta(eps: f64, noise_sigma: f64, sensitivity: f64) -> f64 {
    let a = sensitivity / (2.0 * noise_sigma);
    let b = eps * noise_sigma / sensitivity;
    (normal_cdf(a - b) - eps.exp() * normal_cdf(-a - b)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub eps: f64,
    pub delta: f64,
}

/// δ(ε) of the sensitivity-2 canary mechanism on `0, step, ..., max_eps`.
pub fn gaussian_reference_curve(noise_sigma: f64, step: f64, max_eps: f64) -> Vec<TradeoffPoint> {
    let n = (max_eps / step).floor() as usize;
    (0..=n)
        .map(|i| {
            let eps = i as f64 * step;
            TradeoffPoint { eps, delta: gaussian_delta(eps, noise_sigma, GaussianCanaryMech::SENSITIVITY) }
        })
        .collect()
}
