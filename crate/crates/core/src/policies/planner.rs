use crate::belief::HighlightSet;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::naive::{NaiveModel, TrainingSample};
use crate::policies::{Highlighter, PolicyKind, PolicySpec};
use crate::select::subsets_up_to;

/// Bounds on exhaustive subset search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    /// Largest bandwidth the exact policies accept.
    pub k_max: usize,
    /// Largest number of candidate subsets searched.
    pub subset_cap: u128,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            k_max: 3,
            subset_cap: 10_000_000,
        }
    }
}

/// Builds policies for one naive model and loss.
///
/// Only the `revealable` coordinates are ever highlighted; the remaining
/// ones (for example an outcome coordinate that is part of the prior but
/// cannot be shown) still enter the loss.
#[derive(Debug, Clone)]
pub struct Planner<'a, M: NaiveModel> {
    pub(crate) model: &'a M,
    pub(crate) loss: &'a LossSpec,
    pub(crate) revealable: Vec<usize>,
    pub(crate) limits: EnumerationLimits,
}

impl<'a, M: NaiveModel> Planner<'a, M> {
    /// Every coordinate revealable, default limits.
    pub fn new(model: &'a M, loss: &'a LossSpec) -> Self {
        Self {
            model,
            loss,
            revealable: (0..model.dim()).collect(),
            limits: EnumerationLimits::default(),
        }
    }

    /// Restricts highlighting to `revealable` (sorted and deduplicated).
    pub fn with_revealable(mut self, mut revealable: Vec<usize>) -> Result<Self> {
        revealable.sort_unstable();
        revealable.dedup();
        if let Some(&bad) = revealable.iter().find(|&&j| j >= self.model.dim()) {
            return Err(Error::InvalidArgument(format!(
                "revealable index {bad} out of range"
            )));
        }
        self.revealable = revealable;
        Ok(self)
    }

    pub fn with_limits(mut self, limits: EnumerationLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn model(&self) -> &'a M {
        self.model
    }

    pub fn loss(&self) -> &'a LossSpec {
        self.loss
    }

    pub fn revealable(&self) -> &[usize] {
        &self.revealable
    }

    pub fn limits(&self) -> EnumerationLimits {
        self.limits
    }

    /// Rejects exact searches beyond the bandwidth or subset-count limits.
    pub(crate) fn check_enumeration(&self, k: usize) -> Result<()> {
        if k > self.limits.k_max {
            return Err(Error::InvalidPolicy(format!(
                "exact search needs k <= {}, got {k}",
                self.limits.k_max
            )));
        }
        let subsets = subsets_up_to(self.revealable.len(), k);
        if subsets > self.limits.subset_cap {
            return Err(Error::EnumerationBudgetExceeded {
                subsets,
                cap: self.limits.subset_cap,
            });
        }
        Ok(())
    }

    /// Message a contextual policy sends at `x`.
    pub fn contextual(&self, spec: &PolicySpec, x: &[f64]) -> Result<HighlightSet> {
        match spec.kind {
            PolicyKind::ContextualDeviation => self.contextual_deviation(x, spec.k),
            PolicyKind::ContextualMarginal => self.contextual_marginal(x, spec.k),
            PolicyKind::ContextualGreedy => self.contextual_greedy(x, spec.k, spec.early_stopping),
            PolicyKind::ContextualExact => self.contextual_exact(x, spec.k),
            kind => Err(Error::InvalidPolicy(format!("{kind} is not contextual"))),
        }
    }

    /// Turns a spec into an evaluable policy; fixed kinds are trained on
    /// `sample` (not needed for `FixedTopK`).
    pub fn train(&self, spec: &PolicySpec, sample: Option<&TrainingSample>) -> Result<TrainedPolicy<'_, 'a, M>> {
        spec.validate(self.revealable.len(), &self.limits)?;
        let need_sample = || {
            sample.ok_or_else(|| Error::InvalidArgument(format!("{} needs a training sample", spec.kind)))
        };
        let fixed = match spec.kind {
            PolicyKind::FixedTopK => Some(self.fixed_topk().prefix(spec.k)),
            PolicyKind::FixedMarginalValue => {
                Some(self.fixed_marginal_value(spec.k, need_sample()?)?.prefix(spec.k))
            }
            PolicyKind::FixedForwardStepwise => Some(
                self.fixed_forward_stepwise(spec.k, need_sample()?, spec.early_stopping)?
                    .prefix(spec.k),
            ),
            PolicyKind::FixedExact => Some(self.fixed_exact(spec.k, need_sample()?)?.indices),
            _ => None,
        };
        Ok(TrainedPolicy {
            planner: self,
            spec: *spec,
            fixed,
        })
    }
}

/// A policy ready to be evaluated on instances.
#[derive(Debug, Clone)]
pub struct TrainedPolicy<'p, 'a, M: NaiveModel> {
    planner: &'p Planner<'a, M>,
    spec: PolicySpec,
    fixed: Option<Vec<usize>>,
}

impl<M: NaiveModel> TrainedPolicy<'_, '_, M> {
    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// The trained set of a fixed policy.
    pub fn fixed_set(&self) -> Option<&[usize]> {
        self.fixed.as_deref()
    }

    /// The message sent at `x`.
    pub fn message(&self, x: &[f64]) -> Result<HighlightSet> {
        match &self.fixed {
            Some(set) => HighlightSet::reveal(set, x),
            None => self.planner.contextual(&self.spec, x),
        }
    }
}

impl<M: NaiveModel> Highlighter for TrainedPolicy<'_, '_, M> {
    fn select(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(self.message(x)?.indices().to_vec())
    }

    fn label(&self) -> String {
        self.spec.label()
    }

    fn bandwidth(&self) -> Option<usize> {
        Some(self.spec.k)
    }
}
