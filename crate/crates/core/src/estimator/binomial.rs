//! Binomial probabilities evaluated in log space.
//!
//! Point masses use Loader's saddle-point form (Stirling remainder plus the
//! deviance term `bd0`), which keeps full relative precision for any `k`
//! instead of differencing large log-factorials.

use crate::error::{AuditError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(n!) - [(n + 1/2) ln n - n + ln(2 pi)/2]` for integer `n >= 1`.
fn stirling_remainder(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    if n <= 15 {
        let ln_fact: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
        return ln_fact - (nf + 0.5) * nf.ln() + nf - 0.5 * LN_2PI;
    }
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x ln(x / np) + np - x`, with a series near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P[Binomial(k, p) = x]`.
pub fn ln_binom_pmf(x: u64, k: u64, p: f64) -> f64 {
    if x > k {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == k { 0.0 } else { f64::NEG_INFINITY };
    }
    let kf = k as f64;
    if x == 0 {
        if k == 0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(kf, kf * q) - kf * p } else { kf * q.ln() };
    }
    if x == k {
        return if q < 0.1 { -bd0(kf, kf * p) - kf * q } else { kf * p.ln() };
    }
    let xf = x as f64;
    let lc = stirling_remainder(k)
        - stirling_remainder(x)
        - stirling_remainder(k - x)
        - bd0(xf, kf * p)
        - bd0(kf - xf, kf * q);
    let lf = LN_2PI + xf.ln() + (-xf / kf).ln_1p();
    lc - 0.5 * lf
}

fn check_args(k: u64, c: u64, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AuditError::Domain(format!("success probability must lie in [0, 1], got {p}")));
    }
    if c > k {
        return Err(AuditError::Input(format!("threshold {c} exceeds trial count {k}")));
    }
    Ok(())
}

/// Log-sum-exp over `ln_pmf(i)` for `i` in `range`, stopping once terms fall
/// below `1e-20` of the running sum on the far side of the mode.
fn ln_sum_pmf(k: u64, p: f64, range: impl Iterator<Item = u64>, mode: f64, upward: bool) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for i in range {
        let lt = ln_binom_pmf(i, k, p);
        if lt == f64::NEG_INFINITY {
            continue;
        }
        if lt > max {
            acc = acc * (max - lt).exp() + 1.0;
            max = lt;
        } else {
            acc += (lt - max).exp();
        }
        let past_mode = if upward { i as f64 > mode } else { (i as f64) < mode };
        if past_mode && lt - max < acc.ln() - 46.0 {
            break;
        }
    }
    if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + acc.ln()
    }
}

/// `ln P[Binomial(k, p) >= c]`.
pub fn ln_binom_tail(k: u64, c: u64, p: f64) -> Result<f64> {
    check_args(k, c, p)?;
    if c == 0 {
        return Ok(0.0);
    }
    let mode = (k as f64 + 1.0) * p;
    Ok(ln_sum_pmf(k, p, c..=k, mode, true).min(0.0))
}

/// `P[Binomial(k, p) >= c]`.
pub fn binom_tail(k: u64, c: u64, p: f64) -> Result<f64> {
    Ok(ln_binom_tail(k, c, p)?.exp())
}

/// `P[Binomial(k, p) <= c]`.
pub fn binom_cdf(k: u64, c: u64, p: f64) -> Result<f64> {
    check_args(k, c, p)?;
    if c == k {
        return Ok(1.0);
    }
    let mode = (k as f64 + 1.0) * p;
    Ok(ln_sum_pmf(k, p, (0..=c).rev(), mode, false).min(0.0).exp())
}
