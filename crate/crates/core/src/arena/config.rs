//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; unknown keys are errors.
//!
//! ```text
//! # training
//! batch_size = 8
//! head_units = 512,256,128
//! pass_penalty = 1.5
//! ```

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cql::TrainingConfig;
use crate::features::AutoencoderConfig;
use crate::rhcp::RhcpConfig;
use crate::score::Score;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Everything a run can be configured with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub rhcp: RhcpConfig,
    pub autoencoder: AutoencoderConfig,
    pub episodes: usize,
    pub repeats: usize,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            training: TrainingConfig::default(),
            rhcp: RhcpConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            episodes: 100,
            repeats: 10,
            seeds: Vec::new(),
        }
    }
}

fn list<T: FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

fn half_points(v: &str) -> Option<Score> {
    let x: f64 = v.parse().ok()?;
    let h = x * 2.0;
    (h.fract() == 0.0 && h.abs() < 1e6).then(|| Score::halves(h as i32))
}

/// Applies every assignment in `text` on top of `config`.
pub fn apply_config(text: &str, config: &mut RunConfig) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        macro_rules! set {
            ($field:expr) => {
                $field = value.parse().map_err(|_| bad())?
            };
        }
        let t = &mut config.training;
        let a = &mut config.autoencoder;
        match key {
            "batch_size" => set!(t.batch_size),
            "steps_per_epoch" => set!(t.steps_per_epoch),
            "update_frequency" => set!(t.update_frequency),
            "memory" => set!(t.memory),
            "sampling_limit" => set!(t.sampling_limit),
            "gamma" => set!(t.gamma),
            "epsilon_start" => set!(t.epsilon_start),
            "epsilon_end" => set!(t.epsilon_end),
            "epsilon_anneal_epochs" => set!(t.epsilon_anneal_epochs),
            "target_sync" => set!(t.target_sync),
            "learning_rate" => set!(t.learning_rate),
            "epochs" => set!(t.epochs),
            "eval_episodes" => set!(t.eval_episodes),
            "fc1_units" => set!(t.fc1_units),
            "head_units" => t.head_units = list(value).ok_or_else(bad)?,
            "seed" => set!(t.seed),
            "pass_penalty" => config.rhcp.pass_penalty = half_points(value).ok_or_else(bad)?,
            "ae_filters" => set!(a.filters),
            "ae_epochs" => set!(a.epochs),
            "ae_batch_size" => set!(a.batch_size),
            "ae_learning_rate" => set!(a.learning_rate),
            "ae_target_accuracy" => set!(a.target_accuracy),
            "episodes" => set!(config.episodes),
            "repeats" => set!(config.repeats),
            "seeds" => config.seeds = list(value).ok_or_else(bad)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    config.training.validate().map_err(ConfigError::Invalid)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    apply_config(text, &mut config)?;
    Ok(config)
}

impl RunConfig {
    /// The `key = value` form; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let t = &self.training;
        let a = &self.autoencoder;
        let join = |v: &[String]| v.join(",");
        let mut lines = vec![
            format!("batch_size = {}", t.batch_size),
            format!("steps_per_epoch = {}", t.steps_per_epoch),
            format!("update_frequency = {}", t.update_frequency),
            format!("memory = {}", t.memory),
            format!("sampling_limit = {}", t.sampling_limit),
            format!("gamma = {}", t.gamma),
            format!("epsilon_start = {}", t.epsilon_start),
            format!("epsilon_end = {}", t.epsilon_end),
            format!("epsilon_anneal_epochs = {}", t.epsilon_anneal_epochs),
            format!("target_sync = {}", t.target_sync),
            format!("learning_rate = {}", t.learning_rate),
            format!("epochs = {}", t.epochs),
            format!("eval_episodes = {}", t.eval_episodes),
            format!("fc1_units = {}", t.fc1_units),
            format!(
                "head_units = {}",
                join(&t.head_units.iter().map(|u| u.to_string()).collect::<Vec<_>>())
            ),
            format!("seed = {}", t.seed),
            format!("pass_penalty = {}", self.rhcp.pass_penalty.to_f64()),
            format!("ae_filters = {}", a.filters),
            format!("ae_epochs = {}", a.epochs),
            format!("ae_batch_size = {}", a.batch_size),
            format!("ae_learning_rate = {}", a.learning_rate),
            format!("ae_target_accuracy = {}", a.target_accuracy),
            format!("episodes = {}", self.episodes),
            format!("repeats = {}", self.repeats),
        ];
        if !self.seeds.is_empty() {
            lines.push(format!(
                "seeds = {}",
                join(&self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>())
            ));
        }
        lines.join("\n") + "\n"
    }
}
