//! Experiment config file and seed-list parsing.

use std::path::{Path, PathBuf};

use crowdnav::eval::{EpisodeConfig, LocalizationConfig, MappingConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Map,
    Localize,
    Plan,
    Navigate,
    /// Build the flow map first when a later stage needs one and none is given.
    Full,
}

/// JSON experiment file. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub stage: Option<Stage>,
    pub map: Option<PathBuf>,
    /// Seed of the mapping session run when stage is `full` and no map is given.
    pub map_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub mapping: MappingConfig,
    pub localization: LocalizationConfig,
    pub episode: EpisodeConfig,
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.scenario, &mut cfg.map, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(CliError::Usage(format!("{}: seeds must not be empty", path.display())));
        }
        Ok(cfg)
    }
}

/// Parses `7`, `1..50` (inclusive) or comma-separated mixes such as `1..3,9`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| format!("bad seed '{s}' in '{spec}'"));
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                if b < a {
                    return Err(format!("empty seed range '{part}'"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(num(part)?),
        }
    }
    if seeds.is_empty() {
        return Err(format!("no seeds in '{spec}'"));
    }
    Ok(seeds)
}
