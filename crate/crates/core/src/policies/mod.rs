//! Highlighting policies: maps from an instance to the indices shown.
//!
//! Fixed (ex-ante) policies reveal the same set for every instance and are
//! trained on a sample; contextual policies choose per instance by scoring
//! the naive receiver's realized loss. All of them are built by a
//! [`Planner`], which pairs a naive model with a loss.

mod contextual;
mod fixed;
mod planner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fixed::{FixedOrdering, FixedSubset};
pub use planner::{EnumerationLimits, Planner, TrainedPolicy};

/// Anything that picks which coordinates of an instance to reveal.
pub trait Highlighter: Sync {
    /// Indices to reveal for instance `x`, sorted and distinct.
    fn select(&self, x: &[f64]) -> Result<Vec<usize>>;

    /// Short identifier used in reports.
    fn label(&self) -> String {
        "custom".to_string()
    }

    /// The bandwidth the policy respects, when known.
    fn bandwidth(&self) -> Option<usize> {
        None
    }
}

impl<T: Highlighter + ?Sized> Highlighter for &T {
    fn select(&self, x: &[f64]) -> Result<Vec<usize>> {
        (**self).select(x)
    }

    fn label(&self) -> String {
        (**self).label()
    }

    fn bandwidth(&self) -> Option<usize> {
        (**self).bandwidth()
    }
}

impl<T: Highlighter + ?Sized> Highlighter for Box<T> {
    fn select(&self, x: &[f64]) -> Result<Vec<usize>> {
        (**self).select(x)
    }

    fn label(&self) -> String {
        (**self).label()
    }

    fn bandwidth(&self) -> Option<usize> {
        (**self).bandwidth()
    }
}

/// Always reveals the same indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSet {
    indices: Vec<usize>,
}

impl FixedSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl Highlighter for FixedSet {
    fn select(&self, _x: &[f64]) -> Result<Vec<usize>> {
        Ok(self.indices.clone())
    }

    fn label(&self) -> String {
        format!("fixed{:?}", self.indices)
    }

    fn bandwidth(&self) -> Option<usize> {
        Some(self.indices.len())
    }
}

/// A policy given by a closure; the output is sorted and deduplicated.
pub struct FnHighlighter<F> {
    label: String,
    k: usize,
    f: F,
}

impl<F> FnHighlighter<F>
where
    F: Fn(&[f64]) -> Result<Vec<usize>> + Sync,
{
    pub fn new(label: impl Into<String>, k: usize, f: F) -> Self {
        Self {
            label: label.into(),
            k,
            f,
        }
    }
}

impl<F> Highlighter for FnHighlighter<F>
where
    F: Fn(&[f64]) -> Result<Vec<usize>> + Sync,
{
    fn select(&self, x: &[f64]) -> Result<Vec<usize>> {
        let mut chosen = (self.f)(x)?;
        chosen.sort_unstable();
        chosen.dedup();
        Ok(chosen)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn bandwidth(&self) -> Option<usize> {
        Some(self.k)
    }
}

/// The eight built-in policy families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Rank features once by loss-weighted prior variance.
    #[serde(rename = "fixed_topk")]
    FixedTopK,
    /// Rank features by the training loss when revealed alone.
    #[serde(rename = "fixed_marginal")]
    FixedMarginalValue,
    /// Greedy forward selection on the training loss.
    #[serde(rename = "fixed_stepwise")]
    FixedForwardStepwise,
    /// Exhaustive search over small fixed sets.
    #[serde(rename = "fixed_exact")]
    FixedExact,
    /// Largest deviations from the marginal means.
    #[serde(rename = "contextual_deviation")]
    ContextualDeviation,
    /// Largest single-feature loss reductions.
    #[serde(rename = "contextual_marginal")]
    ContextualMarginal,
    /// Sequential best-reduction selection.
    #[serde(rename = "contextual_greedy")]
    ContextualGreedy,
    /// Exhaustive search over small sets, per instance.
    #[serde(rename = "contextual_exact")]
    ContextualExact,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::FixedTopK,
        PolicyKind::FixedMarginalValue,
        PolicyKind::FixedForwardStepwise,
        PolicyKind::FixedExact,
        PolicyKind::ContextualDeviation,
        PolicyKind::ContextualMarginal,
        PolicyKind::ContextualGreedy,
        PolicyKind::ContextualExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FixedTopK => "fixed_topk",
            Self::FixedMarginalValue => "fixed_marginal",
            Self::FixedForwardStepwise => "fixed_stepwise",
            Self::FixedExact => "fixed_exact",
            Self::ContextualDeviation => "contextual_deviation",
            Self::ContextualMarginal => "contextual_marginal",
            Self::ContextualGreedy => "contextual_greedy",
            Self::ContextualExact => "contextual_exact",
        }
    }

    pub fn is_fixed(self) -> bool {
        matches!(
            self,
            Self::FixedTopK | Self::FixedMarginalValue | Self::FixedForwardStepwise | Self::FixedExact
        )
    }

    /// Whether the kind enumerates subsets and is subject to the limits.
    pub fn is_exact(self) -> bool {
        matches!(self, Self::FixedExact | Self::ContextualExact)
    }

    /// Whether the early-stopping flag means anything for this kind.
    pub fn supports_early_stopping(self) -> bool {
        matches!(self, Self::FixedForwardStepwise | Self::ContextualGreedy)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == normalized)
            .ok_or_else(|| Error::InvalidPolicy(format!("unknown policy kind '{s}'")))
    }
}

/// How ties between equally scored features are broken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    SmallestIndex,
}

/// A policy family with its bandwidth and options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub k: usize,
    #[serde(default)]
    pub early_stopping: bool,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, k: usize) -> Self {
        Self {
            kind,
            k,
            early_stopping: false,
            tie_break: TieBreak::SmallestIndex,
        }
    }

    pub fn with_early_stopping(mut self, early_stopping: bool) -> Self {
        self.early_stopping = early_stopping;
        self
    }

    /// Report label, e.g. `contextual_greedy+stop`.
    pub fn label(&self) -> String {
        if self.early_stopping && self.kind.supports_early_stopping() {
            format!("{}+stop", self.kind.name())
        } else {
            self.kind.name().to_string()
        }
    }

    /// Checks the bandwidth against the number of revealable features and
    /// the enumeration limit.
    pub fn validate(&self, revealable: usize, limits: &EnumerationLimits) -> Result<()> {
        if self.k > revealable {
            return Err(Error::InvalidPolicy(format!(
                "bandwidth {} exceeds the {revealable} revealable features",
                self.k
            )));
        }
        if self.kind.is_exact() && self.k > limits.k_max {
            return Err(Error::InvalidPolicy(format!(
                "{} needs k <= {}, got {}",
                self.kind, limits.k_max, self.k
            )));
        }
        Ok(())
    }
}
