//! Contextual policies: the revealed set depends on the instance.

use crate::belief::HighlightSet;
use crate::error::{check_dim, Result};
use crate::naive::NaiveModel;
use crate::policies::Planner;
use crate::select::{argmax, strictly_greater, tied, top_k};

impl<M: NaiveModel> Planner<'_, M> {
    /// Reveals the `k` features deviating most from their marginal means.
    pub fn contextual_deviation(&self, x: &[f64], k: usize) -> Result<HighlightSet> {
        check_dim(self.model.dim(), x.len())?;
        let means = self.model.marginal_means();
        let scored: Vec<(usize, f64)> = self
            .revealable
            .iter()
            .map(|&j| (j, (x[j] - means[j]).abs()))
            .collect();
        HighlightSet::reveal(&top_k(&scored, k), x)
    }

    /// Reveals the `k` features whose individual reveal lowers the realized
    /// naive loss the most.
    pub fn contextual_marginal(&self, x: &[f64], k: usize) -> Result<HighlightSet> {
        check_dim(self.model.dim(), x.len())?;
        if k == 0 {
            return Ok(HighlightSet::empty());
        }
        let state = self.model.initial_state();
        let baseline = self.model.state_loss(&state, x, self.loss)?;
        let losses = self
            .model
            .losses_after_reveal(&state, x, self.loss, &self.revealable)?;
        let gains: Vec<(usize, f64)> = self
            .revealable
            .iter()
            .zip(losses)
            .map(|(&j, l)| (j, baseline - l))
            .collect();
        HighlightSet::reveal(&top_k(&gains, k), x)
    }

    /// Adds features one at a time, each time the one lowering the realized
    /// naive loss the most. With `early_stopping`, stops once no addition
    /// strictly helps; without it, always fills to `k`.
    pub fn contextual_greedy(&self, x: &[f64], k: usize, early_stopping: bool) -> Result<HighlightSet> {
        check_dim(self.model.dim(), x.len())?;
        let mut state = self.model.initial_state();
        let mut current = self.model.state_loss(&state, x, self.loss)?;
        let mut chosen: Vec<usize> = Vec::new();
        let mut remaining = self.revealable.clone();
        for _ in 0..k.min(self.revealable.len()) {
            let losses = self.model.losses_after_reveal(&state, x, self.loss, &remaining)?;
            let gains: Vec<f64> = losses.iter().map(|l| current - l).collect();
            let best = argmax(&gains).expect("candidates remain");
            if early_stopping && !strictly_greater(gains[best], 0.0) {
                break;
            }
            let j = remaining.remove(best);
            state = self.model.reveal(&state, j, x[j])?;
            current = losses[best];
            chosen.push(j);
        }
        HighlightSet::reveal(&chosen, x)
    }

    /// Exhaustive search over all revealable sets of size at most `k`,
    /// including the empty set. Ties prefer fewer features, then the
    /// lexicographically first set.
    pub fn contextual_exact(&self, x: &[f64], k: usize) -> Result<HighlightSet> {
        check_dim(self.model.dim(), x.len())?;
        self.check_enumeration(k)?;
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut current = Vec::with_capacity(k);
        self.search(&self.model.initial_state(), 0, k, x, &mut current, &mut best)?;
        let (_, set) = best.expect("the empty set is always evaluated");
        HighlightSet::reveal(&set, x)
    }

    fn search(
        &self,
        state: &M::State,
        start: usize,
        k: usize,
        x: &[f64],
        current: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) -> Result<()> {
        let loss = self.model.state_loss(state, x, self.loss)?;
        let improves = match best {
            None => true,
            Some((b, set)) => {
                if tied(loss, *b) {
                    current.len() < set.len()
                } else {
                    loss < *b
                }
            }
        };
        if improves {
            *best = Some((loss, current.clone()));
        }
        if current.len() == k {
            return Ok(());
        }
        if current.len() + 1 == k {
            // Leaves only need their loss; score them in one batch, in the
            // same order the recursion would visit them.
            let candidates = &self.revealable[start..];
            let losses = self.model.losses_after_reveal(state, x, self.loss, candidates)?;
            for (&j, &loss) in candidates.iter().zip(&losses) {
                let (b, _) = best.as_ref().expect("parent evaluated first");
                if loss < *b && !tied(loss, *b) {
                    current.push(j);
                    *best = Some((loss, current.clone()));
                    current.pop();
                }
            }
            return Ok(());
        }
        for pos in start..self.revealable.len() {
            let j = self.revealable[pos];
            let next = self.model.reveal(state, j, x[j])?;
            current.push(j);
            self.search(&next, pos + 1, k, x, current, best)?;
            current.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::belief::{BernoulliBelief, DiscreteBelief};
    use crate::loss::LossSpec;
    use crate::naive::NaiveModel;
    use crate::policies::Planner;

    fn correlated_pair() -> DiscreteBelief {
        DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn remark_instance() -> DiscreteBelief {
        DiscreteBelief::uniform(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn correlated_pair_choices() {
        let prior = correlated_pair();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let x = [0.0, 0.0];
        assert_eq!(planner.contextual_deviation(&x, 1).unwrap().indices(), &[0]);
        assert!(planner.contextual_greedy(&x, 1, true).unwrap().is_empty());
        assert!(planner.contextual_greedy(&x, 2, true).unwrap().is_empty());
        assert_eq!(planner.contextual_greedy(&x, 1, false).unwrap().indices(), &[0]);
        let exact = planner.contextual_exact(&x, 1).unwrap();
        assert!(exact.is_empty());
        assert_eq!(planner.contextual_exact(&x, 2).unwrap().indices(), &[0, 1]);
        assert_eq!(planner.contextual_greedy(&[0.0, 1.0], 1, true).unwrap().indices(), &[1]);
    }

    #[test]
    fn remark_instance_choices() {
        let prior = remark_instance();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let r2 = [1.0, 0.0, 0.0];
        assert_eq!(planner.contextual_deviation(&r2, 2).unwrap().indices(), &[0, 1]);
        assert_eq!(planner.contextual_marginal(&r2, 2).unwrap().indices(), &[0, 2]);
        let greedy = planner.contextual_greedy(&r2, 2, false).unwrap();
        assert_eq!(greedy.indices(), &[0, 2]);
        let l = prior.naive_loss(greedy.indices(), &r2, &loss).unwrap();
        assert!((l - 0.25).abs() < 1e-12);
    }

    #[test]
    fn remark_instance_singleton_gains() {
        let prior = remark_instance();
        let loss = LossSpec::SquaredRecovery;
        let r2 = [1.0, 0.0, 0.0];
        let state = prior.initial_state();
        let base = prior.state_loss(&state, &r2, &loss).unwrap();
        let losses = prior.losses_after_reveal(&state, &r2, &loss, &[0, 1, 2]).unwrap();
        let gains: Vec<f64> = losses.iter().map(|l| base - l).collect();
        let expected = [5.0 / 16.0, 5.0 / 16.0, 49.0 / 144.0];
        for (g, e) in gains.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn fixed_topk_ranks_by_variance() {
        let prior = BernoulliBelief::new(vec![0.5, 0.1, 0.3]).unwrap();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let ordering = planner.fixed_topk();
        assert_eq!(ordering.order, vec![0, 2, 1]);
        assert_eq!(ordering.prefix(1), vec![0]);
        assert!(ordering.prefix(0).is_empty());
        let flat = BernoulliBelief::iid(0.4, 5).unwrap();
        assert_eq!(Planner::new(&flat, &loss).fixed_topk().prefix(3), vec![0, 1, 2]);
    }

    #[test]
    fn revealable_restriction() {
        let prior = remark_instance();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss).with_revealable(vec![2, 1]).unwrap();
        let msg = planner.contextual_deviation(&[1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(msg.indices(), &[1]);
        assert!(Planner::new(&prior, &loss).with_revealable(vec![3]).is_err());
    }

    #[test]
    fn exact_respects_limits() {
        let prior = BernoulliBelief::iid(0.3, 6).unwrap();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        assert!(planner.contextual_exact(&[0.0; 6], 4).is_err());
        let tight = planner.clone().with_limits(crate::policies::EnumerationLimits {
            k_max: 3,
            subset_cap: 10,
        });
        assert!(matches!(
            tight.contextual_exact(&[0.0; 6], 2),
            Err(crate::Error::EnumerationBudgetExceeded { .. })
        ));
    }
}
