//! Plain-text regressor snapshots.
//!
//! ```text
//! canary-audit-regressor 1
//! base_score margin
//! input_dim 10
//! hidden_dims 32
//! activation tanh
//! feature_mean <input_dim floats>
//! feature_scale <input_dim floats>
//! target_mean <float>
//! target_scale <float>
//! nll_trace <floats>
//! params <count>
//! <one float per line, layer by layer: weights row-major, then biases>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a write then read is
//! bit-exact. `hidden_dims` and `nll_trace` may be empty.

use std::io::{BufRead, Write};

use super::regressor::TrainedRegressor;
use super::BaseScore;
use crate::error::{AuditError, Result};
use crate::smallnet::{Activation, NetConfig, NetParams};

pub const REGRESSOR_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "canary-audit-regressor";

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_regressor<W: Write>(reg: &TrainedRegressor, mut out: W) -> Result<()> {
    let cfg = reg.params.config();
    let activation = match cfg.activation {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    };
    writeln!(out, "{MAGIC} {REGRESSOR_FORMAT_VERSION}")?;
    writeln!(out, "base_score {}", reg.base.name())?;
    writeln!(out, "input_dim {}", cfg.input_dim)?;
    writeln!(out, "hidden_dims {}", join(&cfg.hidden_dims))?;
    writeln!(out, "activation {activation}")?;
    writeln!(out, "feature_mean {}", join(&reg.feature_mean))?;
    writeln!(out, "feature_scale {}", join(&reg.feature_scale))?;
    writeln!(out, "target_mean {}", reg.target_mean)?;
    writeln!(out, "target_scale {}", reg.target_scale)?;
    writeln!(out, "nll_trace {}", join(&reg.nll_trace))?;
    writeln!(out, "params {}", reg.params.len())?;
    for v in reg.params.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> AuditError {
    AuditError::Artifact(format!("regressor file: {}", msg.into()))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        Ok(self.inner.next().ok_or_else(|| bad("unexpected end of file"))??)
    }

    /// Values after `key` on the next line.
    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        let (k, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        if k != key {
            return Err(bad(format!("expected `{key}`, found `{k}`")));
        }
        Ok(rest.trim().to_string())
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.field(key)?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad value `{t}` in `{key}`"))))
            .collect()
    }

    fn one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| bad(format!("bad value `{v}` in `{key}`")))
    }
}

pub fn read_regressor<R: BufRead>(input: R) -> Result<TrainedRegressor> {
    let mut lines = Lines { inner: input.lines() };
    let header = lines.next_line()?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| bad("missing header"))?;
    if version != REGRESSOR_FORMAT_VERSION.to_string() {
        return Err(bad(format!("unsupported version `{version}`")));
    }
    let base_name: String = lines.one("base_score")?;
    let base = BaseScore::from_name(&base_name).ok_or_else(|| bad(format!("unknown base score `{base_name}`")))?;
    let input_dim: usize = lines.one("input_dim")?;
    let hidden_dims: Vec<usize> = lines.list("hidden_dims")?;
    let activation = match lines.field("activation")?.as_str() {
        "relu" => Activation::Relu,
        "tanh" => Activation::Tanh,
        other => return Err(bad(format!("unknown activation `{other}`"))),
    };
    let feature_mean: Vec<f64> = lines.list("feature_mean")?;
    let feature_scale: Vec<f64> = lines.list("feature_scale")?;
    let target_mean: f64 = lines.one("target_mean")?;
    let target_scale: f64 = lines.one("target_scale")?;
    let nll_trace: Vec<f64> = lines.list("nll_trace")?;
    let count: usize = lines.one("params")?;
    let values = (0..count)
        .map(|_| {
            let l = lines.next_line()?;
            l.trim().parse::<f64>().map_err(|_| bad(format!("bad parameter `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;

    if feature_mean.len() != input_dim || feature_scale.len() != input_dim {
        return Err(bad("standardization vectors do not match input_dim"));
    }
    let mut config = NetConfig::gaussian_regressor(input_dim, hidden_dims);
    config.activation = activation;
    let params = NetParams::from_values(config, values).map_err(|e| bad(e.to_string()))?;
    Ok(TrainedRegressor {
        params,
        base,
        feature_mean,
        feature_scale,
        target_mean,
        target_scale,
        nll_trace,
    })
}
