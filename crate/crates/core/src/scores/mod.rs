//! Canary scores. Every score here is oriented so that larger means "more
//! likely a training member".

mod format;
mod regressor;

pub use format::{read_regressor, write_regressor, REGRESSOR_FORMAT_VERSION};
pub use regressor::{
    fit_regressor, rescore, rescore_all, train_regressor, RegressorConfig, Rescored, TrainedRegressor,
    SIGMA_FLOOR,
};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{config_err, Result};
use crate::mechanisms::Example;
use crate::smallnet::{cross_entropy, forward, margin_score, Head, NetParams};
use crate::special::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherMeansMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub orientation: Orientation,
}

impl Score {
    fn member(value: f64) -> Self {
        Self { value, orientation: Orientation::HigherMeansMember }
    }
}

/// Scores computed directly from a classifier's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScore {
    Margin,
    Loss,
}

impl BaseScore {
    pub fn name(self) -> &'static str {
        match self {
            BaseScore::Margin => "margin",
            BaseScore::Loss => "loss",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "margin" => Some(BaseScore::Margin),
            "loss" => Some(BaseScore::Loss),
            _ => None,
        }
    }

    pub fn score(self, model: &NetParams, example: &Example) -> Result<Score> {
        match self {
            BaseScore::Margin => score_margin(model, example),
            BaseScore::Loss => score_loss(model, example),
        }
    }
}

fn check_classifier(model: &NetParams) -> Result<()> {
    if model.config().head != Head::Logits {
        return config_err("score needs a classifier with a logits head");
    }
    Ok(())
}

/// True-class logit minus the sum of the other logits.
pub fn score_margin(model: &NetParams, example: &Example) -> Result<Score> {
    check_classifier(model)?;
    let logits = forward(model, &example.features)?;
    Ok(Score::member(margin_score(&logits, example.label)?))
}

/// Negative cross-entropy.
pub fn score_loss(model: &NetParams, example: &Example) -> Result<Score> {
    check_classifier(model)?;
    let logits = forward(model, &example.features)?;
    Ok(Score::member(-cross_entropy(&logits, example.label)?))
}

/// `P[N(mu, sigma^2) < s]`.
pub fn quantile(s: f64, mu: f64, sigma: f64) -> f64 {
    normal_cdf((s - mu) / sigma)
}

/// Examples reserved for fitting the regressor; never trained on, never canaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSet {
    examples: Vec<Example>,
}

impl HoldoutSet {
    /// `ids` index into `pool`; `excluded` lists canary and training indices.
    pub fn new(pool: &[Example], ids: &[usize], excluded: &[usize]) -> Result<Self> {
        if ids.is_empty() {
            return config_err("holdout set is empty");
        }
        let banned: HashSet<usize> = excluded.iter().copied().collect();
        let mut seen = HashSet::with_capacity(ids.len());
        for &i in ids {
            if banned.contains(&i) {
                return config_err(format!("holdout example {i} is also a canary or training example"));
            }
            if i >= pool.len() {
                return config_err(format!("holdout index {i} out of range for {} examples", pool.len()));
            }
            if !seen.insert(i) {
                return config_err(format!("holdout index {i} repeated"));
            }
        }
        Ok(Self { examples: ids.iter().map(|&i| pool[i].clone()).collect() })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[cfg(test)]
mod tests;
