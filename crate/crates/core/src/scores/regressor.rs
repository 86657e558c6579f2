use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{quantile, BaseScore, HoldoutSet, Orientation, Score};
use crate::error::{config_err, AuditError, Result};
use crate::mechanisms::Example;
use crate::smallnet::{
    backward, forward, gaussian_nll_log_sigma, sgd_step, Loss, NetConfig, NetParams, Sample, Target,
};

/// Predicted σ below this is raised to it before rescoring.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorConfig {
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Initial step size; decays to zero on a cosine schedule.
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Bound on the L2 norm of each averaged minibatch gradient.
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_epochs() -> usize {
    60
}
fn default_lr() -> f64 {
    0.05
}
fn default_batch() -> usize {
    32
}
fn default_grad_clip() -> f64 {
    5.0
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            hidden_dims: default_hidden(),
            epochs: default_epochs(),
            lr: default_lr(),
            batch_size: default_batch(),
            grad_clip: default_grad_clip(),
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.contains(&0) {
            return config_err("regressor hidden widths must be >= 1");
        }
        if self.epochs == 0 {
            return config_err("regressor epochs must be >= 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return config_err(format!("regressor lr must be finite and >= 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return config_err("regressor batch size must be >= 1");
        }
        if !(self.grad_clip > 0.0) {
            return config_err(format!("regressor grad_clip must be > 0, got {}", self.grad_clip));
        }
        Ok(())
    }
}

/// Gaussian-head network predicting the distribution of a base score from an
/// example's features. Inputs and targets are standardized internally with
/// statistics of the data it was fit on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRegressor {
    pub(super) params: NetParams,
    pub(super) base: BaseScore,
    pub(super) feature_mean: Vec<f64>,
    pub(super) feature_scale: Vec<f64>,
    pub(super) target_mean: f64,
    pub(super) target_scale: f64,
    pub(super) nll_trace: Vec<f64>,
}

impl TrainedRegressor {
    /// Outputs `(mu, sigma)` for every input.
    pub fn constant(input_dim: usize, base: BaseScore, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(AuditError::Domain(format!("constant regressor needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        let mut params = NetParams::zeros(NetConfig::gaussian_regressor(input_dim, vec![]))?;
        let (_, b) = params.layer_mut(0);
        b[0] = mu;
        b[1] = sigma.ln();
        Ok(Self {
            params,
            base,
            feature_mean: vec![0.0; input_dim],
            feature_scale: vec![1.0; input_dim],
            target_mean: 0.0,
            target_scale: 1.0,
            nll_trace: Vec::new(),
        })
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn base(&self) -> BaseScore {
        self.base
    }

    /// Mean holdout NLL before training, then after each epoch.
    pub fn nll_trace(&self) -> &[f64] {
        &self.nll_trace
    }

    /// NLL of the returned parameters: the best epoch, or the initialization.
    pub fn final_nll(&self) -> Option<f64> {
        self.nll_trace.iter().copied().reduce(f64::min)
    }

    pub fn initial_nll(&self) -> Option<f64> {
        self.nll_trace.first().copied()
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_mean.len() {
            return config_err(format!(
                "regressor expects {} features, got {}",
                self.feature_mean.len(),
                x.len()
            ));
        }
        Ok(x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    /// `(mu, sigma)` in the units of the base score; sigma is not floored.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let out = forward(&self.params, &self.standardize(x)?)?;
        Ok((
            self.target_mean + self.target_scale * out[0],
            self.target_scale * out[1].exp(),
        ))
    }
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

fn mean_nll(params: &NetParams, xs: &[Vec<f64>], zs: &[f64], target_scale: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, &z) in xs.iter().zip(zs) {
        let out = forward(params, x)?;
        total += gaussian_nll_log_sigma(z, out[0], out[1]);
    }
    // Undo the target standardization: NLL shifts by ln(scale).
    Ok(total / xs.len() as f64 + target_scale.ln())
}

/// Fit on raw `(features, score)` pairs. The returned parameters are the best
/// epoch's by mean NLL on the fitting data.
pub fn fit_regressor<R: Rng + ?Sized>(
    features: &[Vec<f64>],
    targets: &[f64],
    base: BaseScore,
    config: &RegressorConfig,
    rng: &mut R,
) -> Result<TrainedRegressor> {
    config.validate()?;
    if features.is_empty() || features.len() != targets.len() {
        return config_err(format!(
            "regressor needs matching nonempty data, got {} feature rows and {} targets",
            features.len(),
            targets.len()
        ));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return config_err("regressor feature rows must share one nonzero width");
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(AuditError::Input("regressor targets must be finite".into()));
    }

    let (feature_mean, feature_scale): (Vec<f64>, Vec<f64>) =
        (0..dim).map(|j| mean_and_scale(features.iter().map(move |f| f[j]))).unzip();
    let (target_mean, target_scale) = mean_and_scale(targets.iter().copied());
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&feature_mean).zip(&feature_scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let zs: Vec<f64> = targets.iter().map(|t| (t - target_mean) / target_scale).collect();

    let net = NetConfig::gaussian_regressor(dim, config.hidden_dims.clone());
    let mut params = NetParams::init(net, rng)?;
    let mut best = params.clone();
    let mut best_nll = mean_nll(&params, &xs, &zs, target_scale)?;
    let mut trace = vec![best_nll];
    let mut order: Vec<usize> = (0..xs.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / config.epochs as f64).cos());
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample<'_>> =
                chunk.iter().map(|&i| Sample { features: &xs[i], target: Target::Value(zs[i]) }).collect();
            let mut grad = backward(&params, &batch, Loss::GaussianNll)?.sum().expect("nonempty chunk");
            grad.scale(1.0 / batch.len() as f64);
            let norm = grad.l2_norm();
            if norm > config.grad_clip {
                grad.scale(config.grad_clip / norm);
            }
            params = sgd_step(&params, &grad, lr)?;
        }
        let nll = if params.is_finite() {
            mean_nll(&params, &xs, &zs, target_scale).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        if !nll.is_finite() {
            return Err(AuditError::Training(format!(
                "regressor NLL became {nll} at epoch {} (best so far {best_nll})",
                epoch + 1
            )));
        }
        trace.push(nll);
        if nll < best_nll {
            best_nll = nll;
            best = params.clone();
        }
    }

    Ok(TrainedRegressor {
        params: best,
        base,
        feature_mean,
        feature_scale,
        target_mean,
        target_scale,
        nll_trace: trace,
    })
}

/// Score the holdout against the released model, then fit.
pub fn train_regressor<R: Rng + ?Sized>(
    holdout: &HoldoutSet,
    target_model: &NetParams,
    base: BaseScore,
    config: &RegressorConfig,
    rng: &mut R,
) -> Result<TrainedRegressor> {
    let mut features = Vec::with_capacity(holdout.len());
    let mut targets = Vec::with_capacity(holdout.len());
    for ex in holdout.examples() {
        targets.push(base.score(target_model, ex)?.value);
        features.push(ex.features.clone());
    }
    fit_regressor(&features, &targets, base, config, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescored {
    pub score: Score,
    pub sigma_clamped: bool,
}

/// `q = Phi((s - mu) / sigma)` with `s` the regressor's base score.
pub fn rescore(regressor: &TrainedRegressor, target_model: &NetParams, example: &Example) -> Result<Rescored> {
    let s = regressor.base.score(target_model, example)?.value;
    let (mu, sigma) = regressor.predict(&example.features)?;
    let sigma_clamped = sigma < SIGMA_FLOOR;
    let q = quantile(s, mu, sigma.max(SIGMA_FLOOR));
    Ok(Rescored {
        score: Score { value: q, orientation: Orientation::HigherMeansMember },
        sigma_clamped,
    })
}

/// Rescore a batch; also returns how many predictions needed the σ floor.
pub fn rescore_all(
    regressor: &TrainedRegressor,
    target_model: &NetParams,
    examples: &[Example],
) -> Result<(Vec<f64>, usize)> {
    let mut clamped = 0;
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let r = rescore(regressor, target_model, ex)?;
        clamped += usize::from(r.sigma_clamped);
        out.push(r.score.value);
    }
    Ok((out, clamped))
}
