//! Engine configuration with per-dataset-style default profiles.
//!
//! Precedence is CLI flag > config file > profile default. Config files are
//! JSON overlays: any subset of fields, optionally starting from a named
//! profile.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::SurrogateConfig;
use crate::providers::prompts::DEFAULT_COMMON_ANSWERER_RULES;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config file does not parse: {0}")]
    Parse(String),
}

/// All tunables for one engine run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Top-k message hits seeding retrieval expansion.
    pub k: usize,
    /// Segment-boundary refinement threshold.
    pub tau1: f64,
    /// Segment-link similarity threshold.
    pub tau2: f64,
    /// Message compression rate in (0, 1].
    pub compression_rate: f64,
    /// Surrogate clip range.
    pub eps_low: f64,
    pub eps_high: f64,
    /// Group size including the injected anchor.
    pub group_size: usize,
    /// Remote provider endpoints; reference providers are used when absent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embed_endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub judge_endpoint: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Shared answering rules injected into assistant-style answer prompts.
    pub common_answerer_rules: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::longmemeval()
    }
}

impl EngineConfig {
    /// Defaults tuned for long user-assistant histories.
    pub fn longmemeval() -> Self {
        Self {
            k: 20,
            tau1: 0.6,
            tau2: 0.9,
            compression_rate: 0.8,
            eps_low: 0.2,
            eps_high: 0.28,
            group_size: 5,
            embed_endpoint: None,
            judge_endpoint: None,
            timeout_secs: 30,
            retries: 2,
            common_answerer_rules: DEFAULT_COMMON_ANSWERER_RULES.to_string(),
        }
    }

    /// Defaults tuned for human-human conversational histories.
    pub fn locomo() -> Self {
        Self {
            k: 40,
            tau1: 0.4,
            ..Self::longmemeval()
        }
    }

    pub fn surrogate(&self) -> SurrogateConfig {
        SurrogateConfig {
            eps_low: self.eps_low,
            eps_high: self.eps_high,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k < 1 {
            return Err(ConfigError::Invalid("k must be >= 1".into()));
        }
        for (name, value) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(-1.0..=1.0).contains(&value) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be in [-1, 1], got {value}"
                )));
            }
        }
        if !(self.compression_rate > 0.0 && self.compression_rate <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "compression_rate must be in (0, 1], got {}",
                self.compression_rate
            )));
        }
        if self.eps_low <= 0.0 || self.eps_high <= 0.0 {
            return Err(ConfigError::Invalid("clip epsilons must be positive".into()));
        }
        if self.group_size < 2 {
            return Err(ConfigError::Invalid("group_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// Partial configuration, as read from a config file or CLI flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    /// Base profile: "longmemeval" (default) or "locomo".
    pub profile: Option<String>,
    pub k: Option<usize>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub compression_rate: Option<f64>,
    pub eps_low: Option<f64>,
    pub eps_high: Option<f64>,
    pub group_size: Option<usize>,
    pub embed_endpoint: Option<String>,
    pub judge_endpoint: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    pub common_answerer_rules: Option<String>,
}

impl ConfigOverlay {
    pub fn from_json(raw: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Resolves the overlay into a full config. The profile (if any) picks
    /// the baseline; explicit fields then override it.
    pub fn resolve(&self, base: Option<EngineConfig>) -> Result<EngineConfig, ConfigError> {
        let mut config = match self.profile.as_deref() {
            Some("longmemeval") | Some("lme") => EngineConfig::longmemeval(),
            Some("locomo") => EngineConfig::locomo(),
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown profile {other:?} (expected \"longmemeval\" or \"locomo\")"
                )))
            }
            None => base.unwrap_or_default(),
        };
        self.apply(&mut config);
        config.validate()?;
        Ok(config)
    }

    /// Overrides `config` with every field present in the overlay.
    pub fn apply(&self, config: &mut EngineConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(value) = &self.$field {
                    config.$field = value.clone();
                })*
            };
        }
        set!(k, tau1, tau2, compression_rate, eps_low, eps_high, group_size, timeout_secs, retries, common_answerer_rules);
        if self.embed_endpoint.is_some() {
            config.embed_endpoint = self.embed_endpoint.clone();
        }
        if self.judge_endpoint.is_some() {
            config.judge_endpoint = self.judge_endpoint.clone();
        }
    }
}
