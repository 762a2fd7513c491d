//! Run configuration file support.
//!
//! Every command accepts `--config FILE` pointing at a JSON object whose keys
//! mirror the long flag names. Values resolve with a fixed precedence:
//! command-line flag, then config file, then built-in default. Unknown keys
//! are rejected so a typo cannot silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Optional overrides loaded from a JSON config file.
///
/// All fields are optional; a missing key simply defers to the flag or the
/// default. Key names use kebab-case to match the corresponding flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub streets: Option<usize>,
    pub seed: Option<u64>,
    pub noise_sigma: Option<f64>,
    pub cps_saturation: Option<f64>,
    pub feature_set: Option<String>,
    pub ae_model: Option<PathBuf>,
    pub no_denoise: Option<bool>,
    pub denoise_k: Option<usize>,
    pub denoise_alpha: Option<f64>,
    pub model: Option<String>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub ae_variant: Option<String>,
    pub ae_epochs: Option<usize>,
    pub ae_batch_size: Option<usize>,
    pub ae_learning_rate: Option<f64>,
    pub ae_stop_tol: Option<f64>,
    pub ae_seed: Option<u64>,
    pub ae_runs: Option<usize>,
    pub protocol: Option<String>,
    pub iterations: Option<usize>,
    pub models: Option<String>,
    pub plan_seed: Option<u64>,
    pub workers: Option<usize>,
    pub lofo_model: Option<String>,
    pub report: Option<PathBuf>,
    pub plot_model: Option<String>,
}

impl RunConfig {
    /// Loads a config file, or returns the empty config when no path is given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Resolves one setting: flag wins, then config, then the default.
pub fn resolve<T: Clone>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Resolves an optional setting with no default.
pub fn resolve_opt<T: Clone>(flag: Option<T>, config: Option<T>) -> Option<T> {
    flag.or(config)
}

/// Resolves a setting that has no default and must end up present.
pub fn require<T: Clone>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(config)
        .ok_or_else(|| CliError::Usage(format!("missing required option --{name}")))
}
