use crate::error::{AuditError, Result};

/// `logits[label] - sum_{j != label} logits[j]`.
pub fn margin_score(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(AuditError::Input(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, v)| v)
        .sum();
    Ok(logits[label] - rest)
}

/// `(s - mu)^2 / (2 sigma^2) + ln sigma`.
pub fn gaussian_nll(s: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(AuditError::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    let r = (s - mu) / sigma;
    Ok(0.5 * r * r + sigma.ln())
}

/// Same loss parameterized by `log_sigma`; finite for any finite input.
pub fn gaussian_nll_log_sigma(s: f64, mu: f64, log_sigma: f64) -> f64 {
    let d = s - mu;
    0.5 * d * d * (-2.0 * log_sigma).exp() + log_sigma
}

/// Loss plus `(d/d mu, d/d log_sigma)`.
pub(super) fn gaussian_nll_grad(s: f64, mu: f64, log_sigma: f64) -> (f64, f64, f64) {
    let inv_var = (-2.0 * log_sigma).exp();
    let d = s - mu;
    let value = 0.5 * d * d * inv_var + log_sigma;
    (value, -d * inv_var, 1.0 - d * d * inv_var)
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(AuditError::Input(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    Ok(-log_softmax(logits)[label])
}

pub(super) fn cross_entropy_with_grad(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let value = cross_entropy(logits, label)?;
    let grad = log_softmax(logits)
        .into_iter()
        .enumerate()
        .map(|(j, lp)| lp.exp() - if j == label { 1.0 } else { 0.0 })
        .collect();
    Ok((value, grad))
}
