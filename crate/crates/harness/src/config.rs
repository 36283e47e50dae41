//! Experiment configuration, loadable from a TOML file.

use std::path::{Path, PathBuf};

use highlight_core::policies::PolicyKind;
use highlight_core::{AgentType, PolicySpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SyntheticSpec;
use crate::error::{io_error, HarnessError, Result};

/// Where evaluation rows come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evaluation {
    /// Evaluate on the calibration rows themselves.
    #[default]
    InSample,
    /// Calibrate on the first part of the rows, evaluate on the last
    /// `fraction` of them.
    Holdout { fraction: f64 },
    /// Evaluate on `n` fresh draws from the fitted prior, snapped to the
    /// observed value alphabets.
    Simulated { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV with a header row; exclusive with `synthetic`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Outcome column (enters the loss with weight `alpha`).
    #[serde(default = "default_target")]
    pub target: String,
    /// Columns that can never be revealed; defaults to just the target.
    #[serde(default)]
    pub hidden: Option<Vec<String>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Policy labels, e.g. `fixed_stepwise` or `contextual_greedy+stop`.
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default = "default_agents")]
    pub agents: Vec<AgentType>,
    /// Prior draws behind the empirical sophisticated posterior.
    #[serde(default = "default_n_support")]
    pub n_support: usize,
    #[serde(default = "default_ridge")]
    pub ridge_lambda: f64,
    #[serde(default)]
    pub evaluation: Evaluation,
    /// Add the full-reveal row and early-stopping greedy at full budget.
    #[serde(default = "default_true")]
    pub full_reveal: bool,
    /// Largest k for the exact policies.
    #[serde(default = "default_k_max")]
    pub k_max_enum: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_target() -> String {
    "log_value".into()
}

fn default_alpha() -> f64 {
    0.5
}

fn default_ks() -> Vec<usize> {
    vec![0, 1, 2, 3, 5, 8, 10]
}

fn default_policies() -> Vec<String> {
    PolicyKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .chain(std::iter::once("contextual_greedy+stop".to_string()))
        .collect()
}

fn default_agents() -> Vec<AgentType> {
    vec![AgentType::Naive]
}

fn default_n_support() -> usize {
    100_000
}

fn default_ridge() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_k_max() -> usize {
    3
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: Some(SyntheticSpec::default()),
            target: default_target(),
            hidden: None,
            alpha: default_alpha(),
            ks: default_ks(),
            policies: default_policies(),
            agents: default_agents(),
            n_support: default_n_support(),
            ridge_lambda: default_ridge(),
            evaluation: Evaluation::default(),
            full_reveal: true,
            k_max_enum: default_k_max(),
            output: None,
            seed: 0,
        }
    }
}

/// A policy label split into its kind and early-stopping flag.
pub fn parse_policy(label: &str) -> Result<(PolicyKind, bool)> {
    let (name, stop) = match label.trim().strip_suffix("+stop") {
        Some(name) => (name, true),
        None => (label.trim(), false),
    };
    let kind: PolicyKind = name.parse()?;
    if stop && !kind.supports_early_stopping() {
        return Err(HarnessError::InvalidConfig(format!("{kind} has no early-stopping variant")));
    }
    Ok((kind, stop))
}

/// The spec for `label` at bandwidth `k`.
pub fn policy_spec(label: &str, k: usize) -> Result<PolicySpec> {
    let (kind, stop) = parse_policy(label)?;
    Ok(PolicySpec::new(kind, k).with_early_stopping(stop))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(HarnessError::InvalidConfig(msg));
        match (&self.input, &self.synthetic) {
            (Some(_), Some(_)) => return invalid("give either an input CSV or a synthetic spec, not both".into()),
            (None, None) => return invalid("no data source".into()),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return invalid(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return invalid(format!("ridge_lambda = {} must be finite and nonnegative", self.ridge_lambda));
        }
        if self.ks.is_empty() || self.policies.is_empty() || self.agents.is_empty() {
            return invalid("ks, policies and agents must be nonempty".into());
        }
        for label in &self.policies {
            parse_policy(label)?;
        }
        if self.agents.contains(&AgentType::Sophisticated) && self.n_support == 0 {
            return invalid("sophisticated rows need n_support > 0".into());
        }
        match self.evaluation {
            Evaluation::Holdout { fraction } if !(fraction > 0.0 && fraction < 1.0) => {
                return invalid(format!("holdout fraction {fraction} outside (0, 1)"));
            }
            Evaluation::Simulated { n, .. } if n < 2 => return invalid("simulated evaluation needs n >= 2".into()),
            _ => {}
        }
        if let Some(spec) = &self.synthetic {
            spec.validate()?;
        }
        Ok(())
    }

    /// Columns that are never revealed.
    pub fn hidden_columns(&self) -> Vec<String> {
        self.hidden.clone().unwrap_or_else(|| vec![self.target.clone()])
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
