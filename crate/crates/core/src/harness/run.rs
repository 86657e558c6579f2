use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MechanismConfig, ScoreMethod};
use crate::error::{config_err, AuditError, Result};
use crate::estimator::{eps_max, sweep_binary, sweep_kary, Sweep};
use crate::game::{partition_binary, partition_kary, ScoreMatrix};
use crate::mechanisms::{
    accuracy, gaussian_reference_curve, make_synthetic, Example, Release, Roles, SyntheticDataset, SyntheticSpec,
    TradeoffPoint,
};
use crate::rng::{derive_seed, stream_rng, trial_seed, Stream};
use crate::scores::{rescore_all, train_regressor, HoldoutSet, TrainedRegressor};
use crate::smallnet::NetParams;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Binary,
    Kary,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::Binary => "binary",
            GameKind::Kary => "kary",
        }
    }

    fn seed_index(self) -> u64 {
        match self {
            GameKind::Binary => 1,
            GameKind::Kary => 2,
        }
    }
}

/// Scores of one game in one trial, enough to redo the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameScores {
    pub game: GameKind,
    pub arity: usize,
    /// Binary game: `±1` per canary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selection: Vec<i8>,
    /// K-ary game: included index per set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chosen: Vec<usize>,
    pub release_digest: String,
    pub scores: Vec<MethodScores>,
}

/// Binary: one score per canary. K-ary: sets × arity, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: ScoreMethod,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseLog {
    pub game: GameKind,
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorLog {
    pub game: GameKind,
    pub initial_nll: f64,
    pub final_nll: f64,
    pub nll_trace: Vec<f64>,
    pub sigma_clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: ScoreMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_or: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_or_fdp: Option<f64>,
    pub eps_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kary: Option<Sweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub releases: Vec<ReleaseLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regressors: Vec<RegressorLog>,
    pub methods: Vec<MethodResult>,
}

impl TrialRecord {
    pub fn method(&self, method: ScoreMethod) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Mean over trials of each per-trial quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: ScoreMethod,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_or: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_or_fdp: Option<f64>,
    pub eps_max: f64,
    /// Sample standard deviation of per-trial `eps_max`.
    pub eps_max_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_true: Option<f64>,
    /// δ(ε) of the Gaussian oracle, for comparing against the empirical bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_curve: Option<Vec<TradeoffPoint>>,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Vec<AggregateRow>,
}

impl AuditResult {
    /// Errors when trials are missing, duplicated or out of order.
    pub fn check_complete(&self) -> Result<()> {
        if self.trials.is_empty() {
            return Err(AuditError::Artifact("result has no trials".into()));
        }
        let missing: Vec<usize> = (0..self.config.trials)
            .filter(|t| self.trials.get(*t).is_none_or(|r| r.trial != *t))
            .collect();
        if !missing.is_empty() || self.trials.len() != self.config.trials {
            return Err(AuditError::Artifact(format!(
                "result holds {} of {} trials; missing or misplaced: {:?}",
                self.trials.len(),
                self.config.trials,
                missing
            )));
        }
        for rec in &self.trials {
            for &m in &self.config.scores.methods {
                if rec.method(m).is_none() {
                    return Err(AuditError::Artifact(format!(
                        "trial {} lacks method {}",
                        rec.trial,
                        m.name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn aggregate_for(&self, method: ScoreMethod) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|a| a.method == method)
    }
}

/// Everything a run produces, including what is persisted beside the result.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: AuditResult,
    pub scores: Vec<Vec<GameScores>>,
    pub regressors: Vec<Vec<(GameKind, TrainedRegressor)>>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

pub fn aggregate(trials: &[TrialRecord], methods: &[ScoreMethod]) -> Result<Vec<AggregateRow>> {
    if trials.is_empty() {
        return Err(AuditError::Artifact("cannot aggregate an empty trial list".into()));
    }
    methods
        .iter()
        .map(|&method| {
            let rows = trials
                .iter()
                .map(|t| {
                    t.method(method).ok_or_else(|| {
                        AuditError::Artifact(format!("trial {} lacks method {}", t.trial, method.name()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let opt_mean = |f: fn(&MethodResult) -> Option<f64>| -> Option<f64> {
                let vals: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
                vals.map(|v| mean(v.into_iter()))
            };
            let maxes: Vec<f64> = rows.iter().map(|r| r.eps_max).collect();
            let m = mean(maxes.iter().copied());
            let sd = if maxes.len() > 1 {
                (maxes.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (maxes.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(AggregateRow {
                method,
                trials: rows.len(),
                eps_or: opt_mean(|r| r.eps_or),
                eps_or_fdp: opt_mean(|r| r.eps_or_fdp),
                eps_max: m,
                eps_max_sd: sd,
            })
        })
        .collect()
}

/// Fails unless `release` still hashes to the digest taken when it was made.
fn check_release(release: &Release, digest: &str) -> Result<()> {
    if release.digest() != digest {
        return Err(AuditError::Artifact("release changed between scoring paths".into()));
    }
    Ok(())
}

struct GameRun {
    scores: GameScores,
    release: ReleaseLog,
    regressor: Option<(TrainedRegressor, RegressorLog)>,
}

struct TrialContext<'a> {
    config: &'a ExperimentConfig,
    data: &'a SyntheticDataset,
    roles: &'a Roles,
    seed: u64,
}

impl TrialContext<'_> {
    fn model_scores(
        &self,
        game: GameKind,
        model: &NetParams,
        canaries: &[Example],
        train_ids: &[usize],
    ) -> Result<(Vec<MethodScores>, Option<(TrainedRegressor, RegressorLog)>)> {
        let mut out = Vec::new();
        let mut regressor = None;
        let game_seed = derive_seed(self.seed, game.seed_index());
        for &method in &self.config.scores.methods {
            let values = match method {
                ScoreMethod::Margin | ScoreMethod::Loss => {
                    let base = if method == ScoreMethod::Margin {
                        crate::scores::BaseScore::Margin
                    } else {
                        crate::scores::BaseScore::Loss
                    };
                    canaries.iter().map(|ex| base.score(model, ex).map(|s| s.value)).collect::<Result<Vec<_>>>()?
                }
                ScoreMethod::Quantile => {
                    let q = &self.config.scores.quantile;
                    let mut excluded = self.roles.canaries.clone();
                    excluded.extend_from_slice(train_ids);
                    let holdout = HoldoutSet::new(&self.data.examples, &self.roles.holdout, &excluded)?;
                    let mut rng = stream_rng(game_seed, Stream::RegressorInit);
                    let reg = train_regressor(&holdout, model, q.base, &q.regressor, &mut rng)?;
                    let (values, clamped) = rescore_all(&reg, model, canaries)?;
                    let log = RegressorLog {
                        game,
                        initial_nll: reg.initial_nll().unwrap_or(f64::NAN),
                        final_nll: reg.final_nll().unwrap_or(f64::NAN),
                        nll_trace: reg.nll_trace().to_vec(),
                        sigma_clamped: clamped,
                    };
                    regressor = Some((reg, log));
                    values
                }
                ScoreMethod::Release => return config_err("release score requested for a trained model"),
            };
            out.push(MethodScores { method, values });
        }
        Ok((out, regressor))
    }

    fn run_game(&self, game: GameKind) -> Result<GameRun> {
        let config = self.config;
        let game_seed = derive_seed(self.seed, game.seed_index());
        let mut part_rng = stream_rng(game_seed, Stream::Partition);
        let mut mech_rng = stream_rng(game_seed, Stream::Mechanism);
        let mechanism = config.mechanism();
        let arity = if game == GameKind::Binary { 2 } else { config.games.arity };

        let (selection, chosen, canary_order, included) = match game {
            GameKind::Binary => {
                let (state, included) = partition_binary(&self.roles.canaries, &self.roles.non_canaries, &mut part_rng)?;
                (state.selection, Vec::new(), self.roles.canaries.clone(), included)
            }
            GameKind::Kary => {
                let (state, included) =
                    partition_kary(&self.roles.canaries, &self.roles.non_canaries, arity, &mut part_rng)?;
                let order: Vec<usize> = state.sets.iter().flatten().copied().collect();
                (Vec::new(), state.chosen, order, included)
            }
        };
        let train = self.data.select(&included);
        let release = match game {
            GameKind::Binary => mechanism.release_binary(&selection, &train, &mut mech_rng)?,
            GameKind::Kary => mechanism.release_kary(&chosen, arity, &train, &mut mech_rng)?,
        };
        let digest = release.digest();

        let mut train_accuracy = None;
        let mut regressor = None;
        let scores = match &release {
            Release::Bits(bits) => vec![MethodScores {
                method: ScoreMethod::Release,
                values: bits.iter().map(|&b| f64::from(b)).collect(),
            }],
            Release::Indices(idx) => vec![MethodScores {
                method: ScoreMethod::Release,
                values: idx
                    .iter()
                    .flat_map(|&u| (0..arity).map(move |j| if j == u { 1.0 } else { 0.0 }))
                    .collect(),
            }],
            Release::Noisy(v) => vec![MethodScores { method: ScoreMethod::Release, values: v.clone() }],
            Release::Model(model) => {
                train_accuracy = Some(accuracy(model, &train)?);
                let canaries = self.data.select(&canary_order);
                let (scores, reg) = self.model_scores(game, model, &canaries, &included)?;
                regressor = reg;
                scores
            }
        };
        check_release(&release, &digest)?;

        Ok(GameRun {
            scores: GameScores { game, arity, selection, chosen, release_digest: digest.clone(), scores },
            release: ReleaseLog { game, digest, train_accuracy },
            regressor,
        })
    }
}

/// Sweep every method's scores for one game.
pub fn sweep_game(scores: &GameScores, config: &ExperimentConfig) -> Result<Vec<(ScoreMethod, Sweep)>> {
    scores
        .scores
        .iter()
        .map(|ms| {
            let sweep = match scores.game {
                GameKind::Binary => sweep_binary(&scores.selection, &ms.values, &config.binary_grid()?, config.alpha)?,
                GameKind::Kary => {
                    let rows = scores.chosen.len();
                    let matrix = ScoreMatrix::new(rows, scores.arity, ms.values.clone())?;
                    sweep_kary(&scores.chosen, &matrix, &config.kary_grid()?, config.alpha)?
                }
            };
            Ok((ms.method, sweep))
        })
        .collect()
}

fn summarize(config: &ExperimentConfig, games: &[GameScores]) -> Result<Vec<MethodResult>> {
    let mut results: Vec<MethodResult> = config
        .scores
        .methods
        .iter()
        .map(|&method| MethodResult { method, eps_or: None, eps_or_fdp: None, eps_max: 0.0, binary: None, kary: None })
        .collect();
    for g in games {
        for (method, sweep) in sweep_game(g, config)? {
            let r = results
                .iter_mut()
                .find(|r| r.method == method)
                .ok_or_else(|| AuditError::Artifact(format!("unexpected method {}", method.name())))?;
            match g.game {
                GameKind::Binary => {
                    r.eps_or = Some(sweep.best.eps);
                    r.binary = Some(sweep);
                }
                GameKind::Kary => {
                    r.eps_or_fdp = Some(sweep.best.eps);
                    r.kary = Some(sweep);
                }
            }
        }
    }
    for r in &mut results {
        r.eps_max = match (&r.binary, &r.kary) {
            (Some(b), Some(k)) => eps_max(&b.best, &k.best)?,
            (Some(b), None) => b.best.eps,
            (None, Some(k)) => k.best.eps,
            (None, None) => return Err(AuditError::Artifact(format!("no scores for {}", r.method.name()))),
        };
    }
    Ok(results)
}

type TrialOutput = (TrialRecord, Vec<GameScores>, Vec<(GameKind, TrainedRegressor)>);

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let seed = trial_seed(config.base_seed, trial as u64);
    let d = &config.data;
    let spec = SyntheticSpec {
        n_total: config.num_examples().max(4),
        dim: d.dim.max(1),
        num_classes: d.num_classes.max(2),
        heterogeneity: d.heterogeneity.clamp(0.0, 1.0),
        separation: d.separation,
    };
    let data = make_synthetic(&spec, &mut stream_rng(seed, Stream::Data))?;
    let roles = Roles::consecutive(d.m, d.r, config.holdout_size());
    let ctx = TrialContext { config, data: &data, roles: &roles, seed };

    let mut games = Vec::new();
    let mut releases = Vec::new();
    let mut regressors = Vec::new();
    let mut logs = Vec::new();
    let kinds = [(config.games.binary, GameKind::Binary), (config.games.kary, GameKind::Kary)];
    for (_, kind) in kinds.into_iter().filter(|(on, _)| *on) {
        let run = ctx.run_game(kind)?;
        games.push(run.scores);
        releases.push(run.release);
        if let Some((reg, log)) = run.regressor {
            regressors.push((kind, reg));
            logs.push(log);
        }
    }
    let methods = summarize(config, &games)?;
    let record = TrialRecord { trial, seed, releases, regressors: logs, methods };
    Ok((record, games, regressors))
}

/// Run every trial (in parallel; results are in trial order and independent of
/// thread count).
pub fn run_experiment_full(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let outputs = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<Vec<_>>>()?;
    let mut trials = Vec::with_capacity(outputs.len());
    let mut scores = Vec::with_capacity(outputs.len());
    let mut regressors = Vec::with_capacity(outputs.len());
    for (rec, sc, reg) in outputs {
        trials.push(rec);
        scores.push(sc);
        regressors.push(reg);
    }
    let aggregate = aggregate(&trials, &config.scores.methods)?;
    let reference_curve = match config.mechanism {
        MechanismConfig::Gaussian { noise_sigma } => Some(gaussian_reference_curve(noise_sigma, 0.25, 10.0)),
        _ => None,
    };
    let result = AuditResult {
        schema_version: RESULT_SCHEMA_VERSION,
        config: config.clone(),
        eps_true: config.mechanism().eps_true(),
        reference_curve,
        trials,
        aggregate,
    };
    Ok(RunOutput { result, scores, regressors })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AuditResult> {
    Ok(run_experiment_full(config)?.result)
}
