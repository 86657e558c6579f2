use super::config::ExperimentConfig;
use crate::error::{config_err, Result};

const PRESETS: &[(&str, &str)] = &[
    ("table1-desk", include_str!("../../../../configs/table1-desk.toml")),
    ("table2-all", include_str!("../../../../configs/table2-all.toml")),
    ("table2-half", include_str!("../../../../configs/table2-half.toml")),
    ("rr-sanity", include_str!("../../../../configs/rr-sanity.toml")),
    ("gaussian-sanity", include_str!("../../../../configs/gaussian-sanity.toml")),
];

pub const PRESET_NAMES: &[&str] = &["table1-desk", "table2-all", "table2-half", "rr-sanity", "gaussian-sanity"];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => ExperimentConfig::from_toml_str(text),
        None => config_err(format!("unknown preset `{name}`; known: {}", PRESET_NAMES.join(", "))),
    }
}
