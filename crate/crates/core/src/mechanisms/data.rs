use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng::standard_normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    /// Exponential(1) draw; scales the example's spread around its class mean.
    pub difficulty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_total: usize,
    pub dim: usize,
    pub num_classes: usize,
    /// In `[0, 1]`; 0 gives every example the same spread.
    pub heterogeneity: f64,
    /// Norm of each class mean.
    pub separation: f64,
}

/// Class-conditional Gaussian blobs with per-example spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub examples: Vec<Example>,
    pub class_means: Vec<Vec<f64>>,
}

/// Which examples play which part in one audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub canaries: Vec<usize>,
    pub non_canaries: Vec<usize>,
    pub holdout: Vec<usize>,
}

impl Roles {
    /// Consecutive blocks: canaries first, then non-canaries, then holdout.
    pub fn consecutive(m: usize, r: usize, holdout: usize) -> Self {
        Self {
            canaries: (0..m).collect(),
            non_canaries: (m..m + r).collect(),
            holdout: (m + r..m + r + holdout).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.canaries.len() + self.non_canaries.len() + self.holdout.len()
    }
}

/// Example `i` has features `mean[label] + (1 + heterogeneity * difficulty) * z`
/// with `z ~ N(0, I)` and `difficulty ~ Exp(1)`.
pub fn make_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<SyntheticDataset> {
    if spec.n_total < 4 {
        return config_err(format!("need at least 4 examples, got {}", spec.n_total));
    }
    if spec.num_classes < 2 {
        return config_err(format!("need at least 2 classes, got {}", spec.num_classes));
    }
    if spec.dim == 0 {
        return config_err("feature dimension must be >= 1");
    }
    if !(0.0..=1.0).contains(&spec.heterogeneity) {
        return config_err(format!("heterogeneity must lie in [0, 1], got {}", spec.heterogeneity));
    }
    if !(spec.separation >= 0.0 && spec.separation.is_finite()) {
        return config_err(format!("separation must be finite and >= 0, got {}", spec.separation));
    }

    let class_means: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            let dir: Vec<f64> = (0..spec.dim).map(|_| standard_normal(rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            dir.into_iter().map(|v| v / norm * spec.separation).collect()
        })
        .collect();

    let examples = (0..spec.n_total)
        .map(|_| {
            let label = rng.gen_range(0..spec.num_classes);
            let difficulty = -(1.0 - rng.gen::<f64>()).ln();
            let spread = 1.0 + spec.heterogeneity * difficulty;
            let features = class_means[label]
                .iter()
                .map(|&mu| mu + spread * standard_normal(rng))
                .collect();
            Example { features, label, difficulty }
        })
        .collect();

    Ok(SyntheticDataset { examples, class_means })
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn select(&self, ids: &[usize]) -> Vec<Example> {
        ids.iter().map(|&i| self.examples[i].clone()).collect()
    }
}
