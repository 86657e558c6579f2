use crate::error::{config_err, AuditError, Result};

use super::NetParams;

/// One gradient per example plus a cache of their L2 norms.
#[derive(Debug, Clone, PartialEq)]
pub struct PerExampleGrads {
    grads: Vec<NetParams>,
    norms: Vec<f64>,
}

impl PerExampleGrads {
    pub fn new(grads: Vec<NetParams>) -> Result<Self> {
        if let Some(first) = grads.first() {
            if grads.iter().any(|g| !g.same_shape(first)) {
                return config_err("per-example gradients have mismatched shapes");
            }
        }
        let norms: Vec<f64> = grads.iter().map(NetParams::l2_norm).collect();
        if norms.iter().any(|n| !n.is_finite()) {
            return Err(AuditError::Training("non-finite per-example gradient".into()));
        }
        Ok(Self { grads, norms })
    }

    pub fn grads(&self) -> &[NetParams] {
        &self.grads
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Elementwise sum in example order.
    pub fn sum(&self) -> Option<NetParams> {
        let mut iter = self.grads.iter();
        let mut total = iter.next()?.clone();
        for g in iter {
            for (a, b) in total.values_mut().iter_mut().zip(g.values()) {
                *a += b;
            }
        }
        Some(total)
    }
}

/// Rescale each example's gradient by `min(1, clip / ||g||)`.
///
/// `clip = f64::INFINITY` disables clipping. Zero gradients pass through.
pub fn clip_per_example(grads: &PerExampleGrads, clip: f64) -> Result<PerExampleGrads> {
    if !(clip > 0.0) {
        return Err(AuditError::Domain(format!("clip norm must be > 0, got {clip}")));
    }
    let mut out = grads.clone();
    for (g, norm) in out.grads.iter_mut().zip(out.norms.iter_mut()) {
        if *norm > clip {
            let factor = clip / *norm;
            g.scale(factor);
            *norm = g.l2_norm();
        }
    }
    Ok(out)
}

/// `params - lr * grads`.
pub fn sgd_step(params: &NetParams, grads: &NetParams, lr: f64) -> Result<NetParams> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(AuditError::Domain(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    let mut next = params.clone();
    next.axpy(-lr, grads)?;
    Ok(next)
}
