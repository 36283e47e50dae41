//! Fixed (ex-ante) policies: one index set for every instance.

use rayon::prelude::*;

use crate::error::Result;
use crate::loss::LossSpec;
use crate::naive::{NaiveModel, TrainingSample};
use crate::policies::Planner;
use crate::select::{for_each_subset, strictly_greater, tied, top_k};

/// Features in the order a fixed policy adds them.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOrdering {
    /// Feature indices, best first.
    pub order: Vec<usize>,
    /// Training loss of each prefix of `order`, starting with the empty
    /// prefix; empty when the ordering was built without a sample.
    pub prefix_losses: Vec<f64>,
}

impl FixedOrdering {
    /// The first `k` features, sorted.
    pub fn prefix(&self, k: usize) -> Vec<usize> {
        let mut set = self.order[..k.min(self.order.len())].to_vec();
        set.sort_unstable();
        set
    }
}

/// Result of the exhaustive fixed search.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSubset {
    pub indices: Vec<usize>,
    pub loss: f64,
}

/// Per-coordinate loss weight: the loss of a unit error in that coordinate.
fn coordinate_weights(loss: &LossSpec, dim: usize) -> Vec<f64> {
    match loss.quadratic_form(dim) {
        Some(form) => (0..dim).map(|j| form.coordinate_weight(j)).collect(),
        None => match loss {
            LossSpec::OutcomeTargeted { alpha, .. } => vec![1.0 - alpha; dim],
            _ => vec![1.0; dim],
        },
    }
}

impl<M: NaiveModel> Planner<'_, M> {
    /// Ranks revealable features once by loss weight × prior variance; for
    /// independent binary features under squared recovery this is p(1 − p).
    pub fn fixed_topk(&self) -> FixedOrdering {
        let weights = coordinate_weights(self.loss, self.model.dim());
        let variances = self.model.marginal_variances();
        let scored: Vec<(usize, f64)> = self
            .revealable
            .iter()
            .map(|&j| (j, weights[j] * variances[j]))
            .collect();
        FixedOrdering {
            order: top_k(&scored, scored.len()),
            prefix_losses: Vec::new(),
        }
    }

    fn prefix_losses(&self, order: &[usize], k: usize, sample: &TrainingSample) -> Result<Vec<f64>> {
        (0..=k.min(order.len()))
            .map(|t| self.model.fixed_set_loss(&order[..t], sample, self.loss))
            .collect()
    }

    /// Ranks features by the training loss when each is revealed alone.
    /// Ignores redundancy between features.
    pub fn fixed_marginal_value(&self, k: usize, sample: &TrainingSample) -> Result<FixedOrdering> {
        let baseline = self.model.fixed_set_loss(&[], sample, self.loss)?;
        let gains: Vec<(usize, f64)> = self
            .revealable
            .par_iter()
            .map(|&j| Ok((j, baseline - self.model.fixed_set_loss(&[j], sample, self.loss)?)))
            .collect::<Result<_>>()?;
        let order = top_k(&gains, gains.len());
        let prefix_losses = self.prefix_losses(&order, k, sample)?;
        Ok(FixedOrdering {
            order,
            prefix_losses,
        })
    }

    /// Greedy forward selection on the training loss. With `early_stopping`
    /// it stops as soon as the best addition fails to lower the loss.
    pub fn fixed_forward_stepwise(
        &self,
        k: usize,
        sample: &TrainingSample,
        early_stopping: bool,
    ) -> Result<FixedOrdering> {
        let mut order: Vec<usize> = Vec::new();
        let mut current = self.model.fixed_set_loss(&[], sample, self.loss)?;
        let mut prefix_losses = vec![current];
        for _ in 0..k.min(self.revealable.len()) {
            let candidates: Vec<usize> = self
                .revealable
                .iter()
                .copied()
                .filter(|j| !order.contains(j))
                .collect();
            let losses: Vec<(usize, f64)> = candidates
                .par_iter()
                .map(|&j| {
                    let mut set = order.clone();
                    set.push(j);
                    Ok((j, self.model.fixed_set_loss(&set, sample, self.loss)?))
                })
                .collect::<Result<_>>()?;
            let gains: Vec<(usize, f64)> = losses.iter().map(|&(j, l)| (j, current - l)).collect();
            let best = top_k(&gains, 1)[0];
            let (_, best_loss) = losses.iter().copied().find(|&(j, _)| j == best).expect("candidate");
            if early_stopping && !strictly_greater(current - best_loss, 0.0) {
                break;
            }
            order.push(best);
            current = best_loss;
            prefix_losses.push(current);
        }
        Ok(FixedOrdering {
            order,
            prefix_losses,
        })
    }

    /// The set of at most `k` revealable features with the smallest training
    /// loss; ties prefer fewer features, then the lexicographically first set.
    pub fn fixed_exact(&self, k: usize, sample: &TrainingSample) -> Result<FixedSubset> {
        self.check_enumeration(k)?;
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for_each_subset(&self.revealable, k, |s| subsets.push(s.to_vec()));
        let losses: Vec<f64> = subsets
            .par_iter()
            .map(|s| self.model.fixed_set_loss(s, sample, self.loss))
            .collect::<Result<_>>()?;
        let mut best = 0;
        for pos in 1..subsets.len() {
            let (l, b) = (losses[pos], losses[best]);
            let better = if tied(l, b) {
                subsets[pos].len() < subsets[best].len()
            } else {
                l < b
            };
            if better {
                best = pos;
            }
        }
        Ok(FixedSubset {
            indices: subsets[best].clone(),
            loss: losses[best],
        })
    }
}
