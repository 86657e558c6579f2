//! Run directories and report rendering.
//!
//! ```text
//! <out>/config.toml              effective configuration
//! <out>/result.json              AuditResult (schema_version inside)
//! <out>/summary.csv              per-trial and mean rows
//! <out>/trials/trial_000.json    one TrialRecord per trial
//! <out>/scores/trial_000.json    per-game canary scores, for `sweep`
//! <out>/regressors/trial_000_<game>.txt
//! <out>/MANIFEST                 "<sha256>  <relative path>" per file above
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ScoreMethod;
use super::run::{aggregate, AuditResult, GameScores, RunOutput, RESULT_SCHEMA_VERSION};
use crate::error::{AuditError, Result};
use crate::scores::write_regressor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Table => "txt",
        }
    }
}

const CAVEATS: &[&str] = &[
    "eps_or: binary membership game; eps_or_fdp: K-ary reconstruction game; both use the binomial",
    "dominance bound at confidence 1 - alpha (delta = 0), not the f-DP estimator.",
    "Each trial reports the best bound over the guess-budget sweep at level alpha per budget;",
    "the maximum is not corrected for multiple comparisons. eps_max is the per-trial maximum",
    "over games, and mean rows average per-trial values.",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    scope: String,
    trial: String,
    method: String,
    eps_or: String,
    eps_or_fdp: String,
    eps_max: String,
}

/// One row per (trial, method), then one `mean` row per method.
pub fn summary_csv(result: &AuditResult) -> Result<String> {
    result.check_complete()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &result.trials {
        for m in &t.methods {
            w.serialize(CsvRow {
                scope: "trial".into(),
                trial: t.trial.to_string(),
                method: m.method.name().into(),
                eps_or: fmt_opt(m.eps_or),
                eps_or_fdp: fmt_opt(m.eps_or_fdp),
                eps_max: m.eps_max.to_string(),
            })?;
        }
    }
    for a in &result.aggregate {
        w.serialize(CsvRow {
            scope: "mean".into(),
            trial: String::new(),
            method: a.method.name().into(),
            eps_or: fmt_opt(a.eps_or),
            eps_or_fdp: fmt_opt(a.eps_or_fdp),
            eps_max: a.eps_max.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| AuditError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(result: &AuditResult) -> Result<String> {
    result.check_complete()?;
    Ok(serde_json::to_string_pretty(result)?)
}

pub fn render_table(result: &AuditResult) -> Result<String> {
    result.check_complete()?;
    let mut s = String::new();
    let c = &result.config;
    let _ = writeln!(s, "# {} ({} trials, base seed {}, alpha {})", c.name, c.trials, c.base_seed, c.alpha);
    if let Some(e) = result.eps_true {
        let _ = writeln!(s, "# true epsilon {e}");
    }
    for line in CAVEATS {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{:<10} {:>6} {:>10} {:>10} {:>10} {:>10}", "method", "trials", "eps_or", "eps_or_fdp", "eps_max", "sd");
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for a in &result.aggregate {
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>10} {:>10} {:>10.4} {:>10.4}",
            a.method.name(),
            a.trials,
            cell(a.eps_or),
            cell(a.eps_or_fdp),
            a.eps_max,
            a.eps_max_sd
        );
    }
    Ok(s)
}

pub fn render(result: &AuditResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => summary_csv(result),
        ReportFormat::Json => render_json(result),
        ReportFormat::Table => render_table(result),
    }
}

fn trial_name(trial: usize) -> String {
    format!("trial_{trial:03}")
}

fn write_file(root: &Path, rel: &str, contents: &[u8], manifest: &mut Vec<(String, String)>) -> Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, contents)?;
    manifest.push((hex::encode(Sha256::digest(contents)), rel.to_string()));
    Ok(())
}

/// Write a complete run directory, replacing files of the same names.
pub fn write_run_dir(out: &Path, run: &RunOutput) -> Result<()> {
    let result = &run.result;
    result.check_complete()?;
    fs::create_dir_all(out)?;
    let mut manifest = Vec::new();
    write_file(out, "config.toml", result.config.to_toml()?.as_bytes(), &mut manifest)?;
    write_file(out, "result.json", render_json(result)?.as_bytes(), &mut manifest)?;
    write_file(out, "summary.csv", summary_csv(result)?.as_bytes(), &mut manifest)?;
    for (i, rec) in result.trials.iter().enumerate() {
        let name = trial_name(rec.trial);
        write_file(out, &format!("trials/{name}.json"), serde_json::to_string_pretty(rec)?.as_bytes(), &mut manifest)?;
        let scores = run.scores.get(i).map(Vec::as_slice).unwrap_or_default();
        write_file(out, &format!("scores/{name}.json"), serde_json::to_string(scores)?.as_bytes(), &mut manifest)?;
        for (game, reg) in run.regressors.get(i).map(Vec::as_slice).unwrap_or_default() {
            let mut buf = Vec::new();
            write_regressor(reg, &mut buf)?;
            write_file(out, &format!("regressors/{name}_{}.txt", game.name()), &buf, &mut manifest)?;
        }
    }
    manifest.sort_by(|a, b| a.1.cmp(&b.1));
    let text: String = manifest.iter().map(|(h, p)| format!("{h}  {p}\n")).collect();
    fs::write(out.join("MANIFEST"), text)?;
    Ok(())
}

/// Read `result.json`, checking the manifest, version, completeness, and
/// aggregates.
pub fn load_result(dir: &Path) -> Result<AuditResult> {
    verify_manifest(dir)?;
    let path = dir.join("result.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| AuditError::Artifact(format!("cannot read {}: {e}", path.display())))?;
    let result: AuditResult = serde_json::from_str(&text)?;
    if result.schema_version != RESULT_SCHEMA_VERSION {
        return Err(AuditError::Artifact(format!(
            "result schema {} is not the supported {}",
            result.schema_version, RESULT_SCHEMA_VERSION
        )));
    }
    result.check_complete()?;
    let recomputed = aggregate(&result.trials, &result.config.scores.methods)?;
    if recomputed != result.aggregate {
        return Err(AuditError::Artifact("stored aggregates disagree with trial records".into()));
    }
    Ok(result)
}

/// Persisted scores of every trial in `dir`.
pub fn load_scores(dir: &Path, trials: usize) -> Result<Vec<Vec<GameScores>>> {
    (0..trials)
        .map(|t| {
            let path: PathBuf = dir.join("scores").join(format!("{}.json", trial_name(t)));
            let text = fs::read_to_string(&path)
                .map_err(|e| AuditError::Artifact(format!("cannot read {}: {e}", path.display())))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

/// Check every MANIFEST entry against the file on disk.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let text = fs::read_to_string(dir.join("MANIFEST"))?;
    for line in text.lines() {
        let (hash, rel) = line
            .split_once("  ")
            .ok_or_else(|| AuditError::Artifact(format!("bad MANIFEST line `{line}`")))?;
        let bytes = fs::read(dir.join(rel))?;
        if hex::encode(Sha256::digest(&bytes)) != hash {
            return Err(AuditError::Artifact(format!("{rel} does not match MANIFEST")));
        }
    }
    Ok(())
}

/// Mean per method of a CSV column, read back from text.
pub fn csv_column_means(csv_text: &str, column: &str) -> Result<Vec<(ScoreMethod, f64)>> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let mut acc: Vec<(ScoreMethod, f64, usize)> = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row?;
        if row.scope != "trial" {
            continue;
        }
        let method = ScoreMethod::from_name(&row.method)
            .ok_or_else(|| AuditError::Artifact(format!("unknown method `{}`", row.method)))?;
        let cell = match column {
            "eps_or" => &row.eps_or,
            "eps_or_fdp" => &row.eps_or_fdp,
            "eps_max" => &row.eps_max,
            other => return Err(AuditError::Input(format!("unknown column `{other}`"))),
        };
        let v: f64 = cell
            .parse()
            .map_err(|_| AuditError::Artifact(format!("bad number `{cell}` in {column}")))?;
        match acc.iter_mut().find(|(m, _, _)| *m == method) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => acc.push((method, v, 1)),
        }
    }
    Ok(acc.into_iter().map(|(m, s, n)| (m, s / n as f64)).collect())
}
