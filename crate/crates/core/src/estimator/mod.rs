//! Empirical epsilon lower bounds from guess tallies.
//!
//! Under an ε-DP mechanism each guess in a K-ary game is correct with
//! probability at most `p(ε, K) = e^ε / (e^ε + K - 1)`, so the number of correct
//! guesses is stochastically dominated by `Binomial(k, p(ε, K))`. Given `c`
//! correct out of `k`, every ε with `P[Binomial(k, p(ε, K)) >= c] < α` is
//! rejected at confidence `1 - α`; the reported bound is the largest such ε.
//!
//! Only δ = 0 bounds are computed. The binary game is the `K = 2` case.

mod binomial;
mod sweep;

pub use binomial::{binom_cdf, binom_tail, ln_binom_pmf, ln_binom_tail};
pub use sweep::{sweep_binary, sweep_kary, BudgetGrid, Sweep, SweepPoint};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, AuditError, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Bisection stops once the bracket is narrower than this.
pub const EPS_TOLERANCE: f64 = 1e-4;
/// Upper end of the search; `p(ε, K)` is 1 to double precision beyond it.
pub const EPS_CAP: f64 = 50.0;

/// Guesses made, guesses correct, arity of the game, significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub guesses: u64,
    pub correct: u64,
    pub arity: u64,
    pub alpha: f64,
}

impl AuditOutcome {
    pub fn new(guesses: u64, correct: u64, arity: u64) -> Result<Self> {
        Self::with_alpha(guesses, correct, arity, DEFAULT_ALPHA)
    }

    pub fn with_alpha(guesses: u64, correct: u64, arity: u64, alpha: f64) -> Result<Self> {
        let outcome = Self { guesses, correct, arity, alpha };
        outcome.validate()?;
        Ok(outcome)
    }

    pub fn validate(&self) -> Result<()> {
        if self.correct > self.guesses {
            return Err(AuditError::Input(format!(
                "{} correct guesses out of {} made",
                self.correct, self.guesses
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AuditError::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.arity == 0 {
            return Err(AuditError::Domain("arity must be >= 1".into()));
        }
        Ok(())
    }

    pub fn set_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }
}

/// Which game produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Binary membership game.
    Or,
    /// K-ary reconstruction game.
    OrFdp,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Or => "eps_or",
            Method::OrFdp => "eps_or_fdp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsLowerBound {
    pub eps: f64,
    pub outcome: AuditOutcome,
    pub method: Method,
}

/// `e^ε / (e^ε + K - 1)`, written to stay finite for large ε.
pub fn success_probability(eps: f64, arity: u64) -> f64 {
    1.0 / (1.0 + (arity as f64 - 1.0) * (-eps).exp())
}

/// Largest ε rejected at level α by the tally, or 0 when chance explains it.
pub fn eps_lower_bound(outcome: &AuditOutcome) -> Result<f64> {
    outcome.validate()?;
    let AuditOutcome { guesses: k, correct: c, arity, alpha } = *outcome;
    if k == 0 || c == 0 || arity < 2 {
        return Ok(0.0);
    }
    let tail = |eps: f64| binom_tail(k, c, success_probability(eps, arity));
    if tail(0.0)? >= alpha {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while tail(hi)? < alpha {
        if hi >= EPS_CAP {
            return Ok(EPS_CAP);
        }
        lo = hi;
        hi = (hi * 2.0).min(EPS_CAP);
    }
    // Invariant: tail(lo) < alpha <= tail(hi).
    while hi - lo > EPS_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if tail(mid)? < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn estimate(outcome: AuditOutcome, method: Method) -> Result<EpsLowerBound> {
    Ok(EpsLowerBound { eps: eps_lower_bound(&outcome)?, outcome, method })
}

/// Per-run maximum over the two games.
pub fn eps_max(a: &EpsLowerBound, b: &EpsLowerBound) -> Result<f64> {
    if a.method == b.method {
        return config_err(format!("both bounds come from {:?}; need one per game", a.method));
    }
    Ok(a.eps.max(b.eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lb(k: u64, c: u64, arity: u64) -> f64 {
        eps_lower_bound(&AuditOutcome::new(k, c, arity).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        // p^10 = 0.05, eps = ln(p / (1 - p))
        let p = 0.05f64.powf(0.1);
        let want = (p / (1.0 - p)).ln();
        assert!((lb(10, 10, 2) - want).abs() < 1e-3);
        assert!((lb(10, 10, 2) - 1.051_873_233).abs() < 1e-3);
        assert!((lb(1, 1, 100) - (0.05f64 * 99.0 / 0.95).ln()).abs() < 1e-3);
        assert_eq!(lb(100, 50, 2), 0.0);
    }

    // Exact-tail bisection in mpmath (tools/golden_eps.py).
    #[test]
    fn golden_values() {
        assert!((lb(100, 90, 2) - 1.630_823_192_740_97).abs() < 1e-3);
        assert!((lb(1000, 600, 2) - 0.297_467_923_649_348).abs() < 1e-3);
        assert!((lb(500, 200, 4) - 0.538_293_818_113_125).abs() < 1e-3);
    }

    #[test]
    fn bound_is_conservative_side_of_root() {
        let e = lb(100, 90, 2);
        assert!(e <= 1.630_823_192_740_97);
        assert!(1.630_823_192_740_97 - e <= EPS_TOLERANCE);
    }

    #[test]
    fn zero_evidence() {
        assert_eq!(lb(0, 0, 2), 0.0);
        assert_eq!(lb(10, 0, 2), 0.0);
    }

    #[test]
    fn probability_identities() {
        for k in 2..50u64 {
            assert_eq!(success_probability(0.0, k), 1.0 / k as f64);
        }
        for i in 0..100 {
            let e = i as f64 * 0.1;
            let direct = e.exp() / (e.exp() + 1.0);
            assert!((success_probability(e, 2) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_tallies_hit_cap_or_finish() {
        let e = lb(1_000_000, 1_000_000, 2);
        assert!(e > 10.0 && e <= EPS_CAP);
    }

    #[test]
    fn eps_max_examples() {
        let o = AuditOutcome::new(1, 1, 2).unwrap();
        let a = EpsLowerBound { eps: 0.2, outcome: o, method: Method::Or };
        let b = EpsLowerBound { eps: 0.1, outcome: o, method: Method::OrFdp };
        assert_eq!(eps_max(&a, &b).unwrap(), 0.2);
        let z1 = EpsLowerBound { eps: 0.0, ..a };
        let z2 = EpsLowerBound { eps: 0.0, ..b };
        assert_eq!(eps_max(&z1, &z2).unwrap(), 0.0);
        assert!(matches!(eps_max(&a, &a), Err(AuditError::Config(_))));
    }

    #[test]
    fn invalid_outcomes() {
        assert!(AuditOutcome::new(3, 4, 2).is_err());
        assert!(AuditOutcome::with_alpha(3, 1, 2, 0.0).is_err());
        assert!(AuditOutcome::with_alpha(3, 1, 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn eps_max_is_max(x in 0.0f64..10.0, y in 0.0f64..10.0) {
            let o = AuditOutcome::new(1, 1, 2).unwrap();
            let a = EpsLowerBound { eps: x, outcome: o, method: Method::Or };
            let b = EpsLowerBound { eps: y, outcome: o, method: Method::OrFdp };
            prop_assert_eq!(eps_max(&a, &b).unwrap(), x.max(y));
        }

        #[test]
        fn monotone_in_correct(k in 1u64..400, frac in 0.0f64..1.0, arity in 2u64..6) {
            let c = ((k as f64) * frac) as u64;
            prop_assume!(c < k);
            prop_assert!(lb(k, c + 1, arity) >= lb(k, c, arity));
        }

        #[test]
        fn monotone_in_alpha(k in 1u64..400, frac in 0.0f64..1.0, a1 in 0.001f64..0.5, a2 in 0.001f64..0.5) {
            let c = ((k as f64) * frac) as u64;
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let e_lo = eps_lower_bound(&AuditOutcome::with_alpha(k, c, 2, lo).unwrap()).unwrap();
            let e_hi = eps_lower_bound(&AuditOutcome::with_alpha(k, c, 2, hi).unwrap()).unwrap();
            prop_assert!(e_hi >= e_lo);
        }

        #[test]
        fn root_brackets_alpha(k in 1u64..300, frac in 0.5f64..1.0) {
            let c = ((k as f64) * frac).ceil() as u64;
            let e = lb(k, c, 2);
            prop_assume!(e > 0.0 && e < EPS_CAP);
            let t_lo = binom_tail(k, c, success_probability(e, 2)).unwrap();
            let t_hi = binom_tail(k, c, success_probability(e + EPS_TOLERANCE, 2)).unwrap();
            prop_assert!(t_lo < 0.05 && t_hi >= 0.05);
        }
    }
}
