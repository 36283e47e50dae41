//! Sophisticated posteriors estimated from simulated prior draws.
//!
//! For continuous priors the selection event has probability zero, so the
//! sophisticated posterior is approximated by drawing from the prior,
//! snapping each draw onto the observed code alphabets, running the policy on
//! the snapped draw, and grouping draws by the message they would produce.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::belief::{HighlightSet, PriorSampler, Snapper};
use crate::error::{check_dim, Error, Result};
use crate::policies::Highlighter;
use crate::seeded_stream;

type CellKey = (Vec<usize>, Vec<u64>);

/// Accumulated draws of one message cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl CellStats {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.count += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Standard error of each coordinate of the cell mean (`None` for a
    /// single draw).
    pub fn std_error(&self) -> Option<Vec<f64>> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        Some(
            self.sum
                .iter()
                .zip(&self.sum_sq)
                .map(|(s, q)| {
                    let var = ((q - s * s / n) / (n - 1.0)).max(0.0);
                    (var / n).sqrt()
                })
                .collect(),
        )
    }
}

/// Cell occupancy summary of an empirical support.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub draws: usize,
    pub cells: usize,
    pub singleton_cells: usize,
    pub max_count: usize,
}

/// Posterior-mean estimate for one message.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimate {
    pub mean: Vec<f64>,
    /// Number of support draws in the matching cell (0 when falling back).
    pub count: usize,
    /// Whether the matching cell was empty and the fallback was used.
    pub fallback: bool,
    pub std_error: Option<Vec<f64>>,
}

/// Simulated support draws grouped by the message the policy emits on them.
#[derive(Debug, Clone)]
pub struct EmpiricalSupport {
    dim: usize,
    draws: usize,
    snapper: Snapper,
    cells: HashMap<CellKey, CellStats>,
}

impl EmpiricalSupport {
    /// Draws `n_support` vectors; draw `i` uses random stream `i` of `seed`,
    /// so the result does not depend on the thread count.
    pub fn build<S, H>(
        sampler: &S,
        policy: &H,
        snapper: &Snapper,
        n_support: usize,
        seed: u64,
    ) -> Result<Self>
    where
        S: PriorSampler,
        H: Highlighter + ?Sized,
    {
        if n_support == 0 {
            return Err(Error::InvalidArgument("n_support must be positive".into()));
        }
        let dim = sampler.dim();
        check_dim(dim, snapper.dim())?;
        let draws: Vec<(CellKey, Vec<f64>)> = (0..n_support)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded_stream(seed, i as u64);
                let x = snapper.snap(&sampler.sample(&mut rng));
                let chosen = policy.select(&x)?;
                let msg = HighlightSet::reveal(&chosen, &x)?;
                Ok((msg.key(), x))
            })
            .collect::<Result<_>>()?;
        let mut cells: HashMap<CellKey, CellStats> = HashMap::new();
        for (key, x) in draws {
            cells.entry(key).or_insert_with(|| CellStats::new(dim)).add(&x);
        }
        Ok(Self {
            dim,
            draws: n_support,
            snapper: snapper.clone(),
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The cell for `msg` after snapping its values.
    pub fn cell(&self, msg: &HighlightSet) -> Option<&CellStats> {
        self.cells.get(&msg.snapped(&self.snapper).key())
    }

    /// Cell mean for `msg`, or `fallback(msg)` when no draw produced it.
    pub fn estimate<F>(&self, msg: &HighlightSet, fallback: F) -> Result<EmpiricalEstimate>
    where
        F: FnOnce(&HighlightSet) -> Result<Vec<f64>>,
    {
        msg.check_dim(self.dim)?;
        match self.cell(msg) {
            Some(cell) => Ok(EmpiricalEstimate {
                mean: cell.mean(),
                count: cell.count,
                fallback: false,
                std_error: cell.std_error(),
            }),
            None => {
                let mean = fallback(msg)?;
                check_dim(self.dim, mean.len())?;
                Ok(EmpiricalEstimate {
                    mean,
                    count: 0,
                    fallback: true,
                    std_error: None,
                })
            }
        }
    }

    pub fn occupancy(&self) -> Occupancy {
        Occupancy {
            draws: self.draws,
            cells: self.cells.len(),
            singleton_cells: self.cells.values().filter(|c| c.count == 1).count(),
            max_count: self.cells.values().map(|c| c.count).max().unwrap_or(0),
        }
    }
}

/// One-shot estimate of the sophisticated posterior mean for `msg`.
///
/// `fallback` supplies the estimate when no simulated draw produces the
/// message; callers normally pass the analytic naive posterior mean.
pub fn empirical_sophisticated_posterior<S, H, F>(
    sampler: &S,
    policy: &H,
    msg: &HighlightSet,
    n_support: usize,
    snapper: &Snapper,
    fallback: F,
    seed: u64,
) -> Result<EmpiricalEstimate>
where
    S: PriorSampler,
    H: Highlighter + ?Sized,
    F: FnOnce(&HighlightSet) -> Result<Vec<f64>>,
{
    EmpiricalSupport::build(sampler, policy, snapper, n_support, seed)?.estimate(msg, fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::DiscreteBelief;
    use crate::policies::FnHighlighter;

    #[test]
    fn fully_revealing_selection_recovers_state() {
        let prior = DiscreteBelief::uniform(vec![vec![0.0, 5.0], vec![1.0, -5.0]]).unwrap();
        // Revealing coordinate 0 only in state (0, 5) pins it down.
        let policy = FnHighlighter::new("tell", 1, |x: &[f64]| {
            Ok(if x[0] == 0.0 { vec![0] } else { vec![] })
        });
        let snapper = Snapper::identity(2);
        let support = EmpiricalSupport::build(&prior, &policy, &snapper, 500, 3).unwrap();
        let est = support
            .estimate(&HighlightSet::empty(), |_| unreachable!())
            .unwrap();
        assert_eq!(est.mean, vec![1.0, -5.0]);
        assert!(!est.fallback);
        let occ = support.occupancy();
        assert_eq!(occ.cells, 2);
        assert_eq!(occ.draws, 500);
    }

    #[test]
    fn empty_cell_falls_back() {
        let prior = DiscreteBelief::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let policy = FnHighlighter::new("none", 1, |_: &[f64]| Ok(vec![]));
        let est = empirical_sophisticated_posterior(
            &prior,
            &policy,
            &HighlightSet::new(vec![0], vec![1.0]).unwrap(),
            50,
            &Snapper::identity(1),
            |m| Ok(m.values().to_vec()),
            1,
        )
        .unwrap();
        assert!(est.fallback);
        assert_eq!(est.mean, vec![1.0]);
        assert_eq!(est.count, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let prior = crate::GaussianBelief::standard(3).unwrap();
        let policy = FnHighlighter::new("first", 1, |_: &[f64]| Ok(vec![0]));
        let snapper = Snapper::new(vec![Some(vec![-1.0, 0.0, 1.0]), None, None]).unwrap();
        let msg = HighlightSet::new(vec![0], vec![1.0]).unwrap();
        let a = EmpiricalSupport::build(&prior, &policy, &snapper, 2000, 9).unwrap();
        let b = EmpiricalSupport::build(&prior, &policy, &snapper, 2000, 9).unwrap();
        assert_eq!(a.cell(&msg), b.cell(&msg));
        // A message value off the alphabet snaps onto it.
        let off = HighlightSet::new(vec![0], vec![0.8]).unwrap();
        assert_eq!(a.cell(&off), a.cell(&msg));
    }
}
