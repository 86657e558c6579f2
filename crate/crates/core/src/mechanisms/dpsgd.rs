use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::Example;
use crate::error::{config_err, AuditError, Result};
use crate::rng::standard_normal;
use crate::smallnet::{
    backward, clip_per_example, sgd_step, Loss, NetConfig, NetParams, Sample, Target,
};

/// `clip_norm = f64::INFINITY` disables clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub clip_norm: f64,
    pub noise_multiplier: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub net: NetConfig,
}

impl DpSgdConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.net.validate()?;
        if !(self.clip_norm > 0.0) {
            return config_err(format!("clip norm must be > 0, got {}", self.clip_norm));
        }
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            return config_err(format!("noise multiplier must be finite and >= 0, got {}", self.noise_multiplier));
        }
        if self.noise_multiplier > 0.0 && !self.clip_norm.is_finite() {
            return config_err("noise needs a finite clip norm");
        }
        if self.steps == 0 {
            return config_err("steps must be >= 1");
        }
        if self.batch_size == 0 || self.batch_size > n {
            return config_err(format!("batch size {} must lie in 1..={n}", self.batch_size));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return config_err(format!("learning rate must be finite and > 0, got {}", self.lr));
        }
        Ok(())
    }
}

struct StepStats {
    batch_len: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    max_applied_norm: f64,
}

/// One noisy step. Each example joins the batch independently with
/// probability `batch_size / n`; the noisy sum is divided by `batch_size`.
fn dp_step<R: Rng + ?Sized>(
    params: &NetParams,
    data: &[Example],
    config: &DpSgdConfig,
    rng: &mut R,
) -> Result<(NetParams, StepStats)> {
    let rate = config.batch_size as f64 / data.len() as f64;
    let batch: Vec<Sample<'_>> = data
        .iter()
        .filter(|_| rng.gen::<f64>() < rate)
        .map(|ex| Sample { features: &ex.features, target: Target::Label(ex.label) })
        .collect();

    let (mut total, max_applied_norm) = if batch.is_empty() {
        (NetParams::zeros(params.config().clone())?, 0.0)
    } else {
        let grads = clip_per_example(&backward(params, &batch, Loss::CrossEntropy)?, config.clip_norm)?;
        let max_norm = grads.norms().iter().copied().fold(0.0, f64::max);
        (grads.sum().expect("nonempty batch"), max_norm)
    };

    if config.noise_multiplier > 0.0 {
        let sd = config.clip_norm * config.noise_multiplier;
        for v in total.values_mut() {
            *v += sd * standard_normal(rng);
        }
    }
    total.scale(1.0 / config.batch_size as f64);
    let next = sgd_step(params, &total, config.lr)?;
    Ok((next, StepStats { batch_len: batch.len(), max_applied_norm }))
}

fn mean_loss(params: &NetParams, data: &[Example]) -> Result<f64> {
    let mut sum = 0.0;
    for ex in data {
        sum += crate::smallnet::example_loss(params, &ex.features, Target::Label(ex.label), Loss::CrossEntropy)?;
    }
    Ok(sum / data.len() as f64)
}

/// Train a classifier on the IN examples and release only the final weights.
pub fn dpsgd_train<R: Rng + ?Sized>(data: &[Example], config: &DpSgdConfig, rng: &mut R) -> Result<NetParams> {
    train_with(data, config, rng, |_, _| {})
}

fn train_with<R: Rng + ?Sized>(
    data: &[Example],
    config: &DpSgdConfig,
    rng: &mut R,
    mut observe: impl FnMut(usize, &StepStats),
) -> Result<NetParams> {
    if data.is_empty() {
        return Err(AuditError::Input("DP-SGD needs at least one training example".into()));
    }
    config.validate(data.len())?;
    let mut params = NetParams::init(config.net.clone(), rng)?;
    for step in 0..config.steps {
        let (next, stats) = dp_step(&params, data, config, rng)?;
        if !next.is_finite() {
            let loss = mean_loss(&params, data).unwrap_or(f64::NAN);
            return Err(AuditError::Training(format!(
                "parameters diverged at step {step} (mean loss before step {loss}, batch {})",
                stats.batch_len
            )));
        }
        observe(step, &stats);
        params = next;
    }
    let loss = mean_loss(&params, data)?;
    if !loss.is_finite() {
        return Err(AuditError::Training(format!("final training loss is {loss}")));
    }
    Ok(params)
}

/// Fraction of examples whose largest logit is the label.
pub fn accuracy(params: &NetParams, data: &[Example]) -> Result<f64> {
    let mut hits = 0usize;
    for ex in data {
        let out = crate::smallnet::forward(params, &ex.features)?;
        let pred = out
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if *v > out[best] { j } else { best });
        hits += usize::from(pred == ex.label);
    }
    Ok(hits as f64 / data.len() as f64)
}
