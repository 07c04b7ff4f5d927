//! TOML scenario files.
//!
//! Every section and key is optional; omitted values take the defaults of
//! [`Scenario::default`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sim::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("{origin}: {source}")]
    Invalid { origin: String, source: ScenarioError },
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario; `origin` labels error messages.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Parse { origin: origin.to_string(), line, column, message: e.message().to_string() }
    })?;
    scenario.validate().map_err(|source| ConfigError::Invalid { origin: origin.to_string(), source })?;
    Ok(scenario)
}

pub fn parse_scenario_file(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_scenario_str(&text, &path.display().to_string())
}

pub fn scenario_to_toml(scenario: &Scenario) -> Result<String, ConfigError> {
    Ok(toml::to_string(scenario)?)
}
