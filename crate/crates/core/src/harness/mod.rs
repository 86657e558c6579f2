//! Experiment configuration, multi-trial runs, persistence and reports.
//!
//! Trial `t` draws from `trial_seed(base_seed, t)`. The dataset comes from its
//! data stream; each game then derives its own seed and takes separate
//! partition, mechanism and regressor streams from it, so every game has its
//! own partition and release. All score methods inside a game read the same
//! release, which is re-hashed before and after scoring.

mod config;
mod presets;
mod report;
mod run;

pub use config::{
    DataConfig, ExperimentConfig, GamesConfig, MechanismConfig, QuantileConfig, ScoreMethod, ScoresConfig,
    SweepConfig,
};
pub use presets::{preset, PRESET_NAMES};
pub use report::{
    csv_column_means, load_result, load_scores, render, render_json, render_table, summary_csv, verify_manifest,
    write_run_dir, ReportFormat,
};
pub use run::{
    aggregate, run_experiment, run_experiment_full, sweep_game, AggregateRow, AuditResult, GameKind, GameScores,
    MethodResult, MethodScores, RegressorLog, ReleaseLog, RunOutput, TrialRecord, RESULT_SCHEMA_VERSION,
};
