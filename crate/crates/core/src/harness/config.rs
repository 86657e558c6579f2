use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, AuditError, Result};
use crate::estimator::BudgetGrid;
use crate::mechanisms::{DpSgdConfig, GaussianCanaryMech, Mechanism, RandomizedResponseMech};
use crate::scores::{BaseScore, RegressorConfig};
use crate::smallnet::{Activation, NetConfig};

/// One audit experiment. See `configs/` for annotated examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub data: DataConfig,
    pub mechanism: MechanismConfig,
    pub games: GamesConfig,
    pub scores: ScoresConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_alpha() -> f64 {
    crate::estimator::DEFAULT_ALPHA
}

/// `n` is the size of the training set; `m` canaries and `r` non-canaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub heterogeneity: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_separation() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    Rr {
        eps_true: f64,
    },
    Gaussian {
        noise_sigma: f64,
    },
    Dpsgd {
        clip_norm: f64,
        noise_multiplier: f64,
        steps: usize,
        batch_size: usize,
        lr: f64,
        #[serde(default)]
        hidden_dims: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GamesConfig {
    #[serde(default = "yes")]
    pub binary: bool,
    #[serde(default)]
    pub kary: bool,
    #[serde(default = "default_arity")]
    pub arity: usize,
}

fn yes() -> bool {
    true
}
fn default_arity() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    /// The analytic mechanisms' output, used as the score as-is.
    Release,
    Margin,
    Loss,
    Quantile,
}

impl ScoreMethod {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Release => "release",
            ScoreMethod::Margin => "margin",
            ScoreMethod::Loss => "loss",
            ScoreMethod::Quantile => "quantile",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [ScoreMethod::Release, ScoreMethod::Margin, ScoreMethod::Loss, ScoreMethod::Quantile]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresConfig {
    pub methods: Vec<ScoreMethod>,
    #[serde(default)]
    pub quantile: QuantileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileConfig {
    #[serde(default = "default_base")]
    pub base: BaseScore,
    /// Holdout examples for the regressor; defaults to `2 m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout: Option<usize>,
    #[serde(default)]
    pub regressor: RegressorConfig,
}

fn default_base() -> BaseScore {
    BaseScore::Margin
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self { base: default_base(), holdout: None, regressor: RegressorConfig::default() }
    }
}

/// Budgets `step, 2 step, ...` up to the game's maximum, unless `budgets`
/// lists them explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<usize>>,
}

fn default_step() -> usize {
    10
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { step: default_step(), budgets: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| AuditError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AuditError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if self.trials == 0 {
            return config_err("trials must be >= 1");
        }
        if self.base_seed > i64::MAX as u64 {
            return config_err("base_seed must fit in a signed 64-bit integer");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return config_err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if d.m == 0 {
            return config_err("need at least one canary");
        }
        if !self.games.binary && !self.games.kary {
            return config_err("enable at least one game");
        }
        if self.games.binary {
            if !d.m.is_multiple_of(2) {
                return config_err(format!("binary game needs an even number of canaries, got {}", d.m));
            }
            if d.n != d.r + d.m / 2 {
                return config_err(format!("binary game needs n = r + m/2, got n = {}, r = {}, m = {}", d.n, d.r, d.m));
            }
        }
        if self.games.kary {
            let k = self.games.arity;
            if k < 2 {
                return config_err(format!("K-ary game needs arity >= 2, got {k}"));
            }
            if !d.m.is_multiple_of(k) {
                return config_err(format!("{} canaries do not split into sets of {k}", d.m));
            }
            if d.n != d.r + d.m / k {
                return config_err(format!("K-ary game needs n = r + m/K, got n = {}, r = {}, m = {}, K = {k}", d.n, d.r, d.m));
            }
        }

        let methods = &self.scores.methods;
        if methods.is_empty() {
            return config_err("list at least one score method");
        }
        let mut sorted = methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != methods.len() {
            return config_err("score methods are listed more than once");
        }
        match &self.mechanism {
            MechanismConfig::Rr { eps_true } => {
                if !(*eps_true >= 0.0 && eps_true.is_finite()) {
                    return config_err(format!("eps_true must be finite and >= 0, got {eps_true}"));
                }
            }
            MechanismConfig::Gaussian { noise_sigma } => {
                if !(*noise_sigma > 0.0 && noise_sigma.is_finite()) {
                    return config_err(format!("noise_sigma must be finite and > 0, got {noise_sigma}"));
                }
            }
            MechanismConfig::Dpsgd { .. } => {}
        }
        let analytic = !matches!(self.mechanism, MechanismConfig::Dpsgd { .. });
        if analytic && methods != &[ScoreMethod::Release] {
            return config_err("rr and gaussian mechanisms are scored by their release: methods = [\"release\"]");
        }
        if !analytic && methods.contains(&ScoreMethod::Release) {
            return config_err("the release score applies only to the rr and gaussian mechanisms");
        }

        if !analytic {
            if d.num_classes < 2 || d.dim == 0 {
                return config_err("dpsgd needs dim >= 1 and num_classes >= 2");
            }
            if !(0.0..=1.0).contains(&d.heterogeneity) {
                return config_err(format!("heterogeneity must lie in [0, 1], got {}", d.heterogeneity));
            }
            if let Mechanism::Dpsgd(cfg) = self.mechanism() {
                cfg.validate(d.n)?;
            }
        }
        if methods.contains(&ScoreMethod::Quantile) {
            if self.holdout_size() == 0 {
                return config_err("quantile score needs a nonempty holdout");
            }
            self.scores.quantile.regressor.validate()?;
        }

        if self.sweep.step == 0 {
            return config_err("sweep step must be >= 1");
        }
        if self.games.binary {
            self.binary_grid()?;
        }
        if self.games.kary {
            self.kary_grid()?;
        }
        Ok(())
    }

    pub fn holdout_size(&self) -> usize {
        if self.scores.methods.contains(&ScoreMethod::Quantile) {
            self.scores.quantile.holdout.unwrap_or(2 * self.data.m)
        } else {
            0
        }
    }

    /// Canaries, then non-canaries, then holdout.
    pub fn num_examples(&self) -> usize {
        self.data.m + self.data.r + self.holdout_size()
    }

    pub fn num_sets(&self) -> usize {
        self.data.m / self.games.arity.max(1)
    }

    fn grid(&self, max: usize, what: &str) -> Result<BudgetGrid> {
        match &self.sweep.budgets {
            Some(b) => {
                if let Some(&bad) = b.iter().find(|&&x| x == 0 || x > max) {
                    return config_err(format!("{what} budget {bad} outside 1..={max}"));
                }
                BudgetGrid::explicit(b.clone())
            }
            None => BudgetGrid::multiples(self.sweep.step, max),
        }
    }

    pub fn binary_grid(&self) -> Result<BudgetGrid> {
        self.grid(self.data.m, "binary")
    }

    pub fn kary_grid(&self) -> Result<BudgetGrid> {
        self.grid(self.num_sets(), "K-ary")
    }

    pub fn mechanism(&self) -> Mechanism {
        match &self.mechanism {
            MechanismConfig::Rr { eps_true } => Mechanism::Rr(RandomizedResponseMech { eps_true: *eps_true }),
            MechanismConfig::Gaussian { noise_sigma } => {
                Mechanism::Gaussian(GaussianCanaryMech { noise_sigma: *noise_sigma })
            }
            MechanismConfig::Dpsgd { clip_norm, noise_multiplier, steps, batch_size, lr, hidden_dims, activation } => {
                let mut net = NetConfig::classifier(self.data.dim, hidden_dims.clone(), self.data.num_classes);
                net.activation = *activation;
                Mechanism::Dpsgd(DpSgdConfig {
                    clip_norm: *clip_norm,
                    noise_multiplier: *noise_multiplier,
                    steps: *steps,
                    batch_size: *batch_size,
                    lr: *lr,
                    net,
                })
            }
        }
    }
}
