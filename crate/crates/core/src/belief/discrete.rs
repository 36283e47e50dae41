use rand::{Rng, RngExt};
use serde::Serialize;

use crate::belief::{values_match, BernoulliBelief, HighlightSet, PriorSampler};
use crate::error::{check_dim, Error, Result};
use crate::policies::Highlighter;

const MAX_ENUMERATED_DIM: usize = 20;

/// A prior with finite support: distinct feature vectors with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteBelief {
    dim: usize,
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl DiscreteBelief {
    /// Validates and builds a table prior.
    ///
    /// Probabilities must be nonnegative and sum to one within 1e-12; support
    /// vectors must share a positive length and be pairwise distinct.
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidBelief("empty support".into()));
        }
        check_dim(support.len(), probs.len())?;
        let dim = support[0].len();
        if dim == 0 {
            return Err(Error::InvalidBelief("zero-dimensional support".into()));
        }
        for x in &support {
            check_dim(dim, x.len())?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidBelief("non-finite support value".into()));
            }
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidBelief(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBelief(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        for a in 0..support.len() {
            for b in (a + 1)..support.len() {
                if same_point(&support[a], &support[b]) {
                    return Err(Error::InvalidBelief(format!(
                        "support points {a} and {b} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            support,
            probs,
        })
    }

    /// Uniform prior over the given points.
    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len();
        Self::from_weights(support, vec![1.0; n])
    }

    /// Prior proportional to nonnegative `weights`.
    pub fn from_weights(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidBelief(
                "weights must be nonnegative with positive finite sum".into(),
            ));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(support, probs)
    }

    /// All mass on one point.
    pub fn point_mass(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// The product distribution of independent binary features, enumerated.
    pub fn from_bernoulli(belief: &BernoulliBelief) -> Result<Self> {
        let d = belief.dim();
        if d > MAX_ENUMERATED_DIM {
            return Err(Error::InvalidArgument(format!(
                "cannot enumerate 2^{d} binary states"
            )));
        }
        let means = belief.means();
        let mut support = Vec::with_capacity(1 << d);
        let mut probs = Vec::with_capacity(1 << d);
        for code in 0u32..(1u32 << d) {
            let x: Vec<f64> = (0..d).map(|j| f64::from((code >> j) & 1)).collect();
            let p: f64 = x
                .iter()
                .zip(means)
                .map(|(&v, &m)| if v == 1.0 { m } else { 1.0 - m })
                .product();
            support.push(x);
            probs.push(p);
        }
        Self::new(support, probs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// (point, probability) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.support
            .iter()
            .map(Vec::as_slice)
            .zip(self.probs.iter().copied())
    }

    /// Mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (x, p) in self.iter() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += p * v;
            }
        }
        mean
    }

    /// Per-coordinate variances.
    pub fn variances(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; self.dim];
        for (x, p) in self.iter() {
            for j in 0..self.dim {
                var[j] += p * (x[j] - mean[j]).powi(2);
            }
        }
        var
    }

    /// Expectation of `f` under the prior.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, p)| p * f(x)).sum()
    }

    /// Renormalized restriction to the support positions `keep`.
    ///
    /// Zero-probability points are dropped; an empty or massless restriction
    /// is an [`Error::EmptyConditioningSet`].
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let kept: Vec<usize> = keep
            .iter()
            .copied()
            .filter(|&i| self.probs[i] > 0.0)
            .collect();
        let mass: f64 = kept.iter().map(|&i| self.probs[i]).sum();
        if kept.is_empty() || mass <= 0.0 {
            return Err(Error::EmptyConditioningSet);
        }
        Ok(Self {
            dim: self.dim,
            support: kept.iter().map(|&i| self.support[i].clone()).collect(),
            probs: kept.iter().map(|&i| self.probs[i] / mass).collect(),
        })
    }

    /// Naive posterior: condition on the revealed values only.
    pub fn condition(&self, msg: &HighlightSet) -> Result<Self> {
        msg.check_dim(self.dim)?;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| msg.matches(&self.support[i]))
            .collect();
        self.restrict(&keep)
    }

    /// Sophisticated posterior: also condition on the policy having chosen
    /// exactly the revealed index set.
    pub fn condition_on_selection<H: Highlighter + ?Sized>(
        &self,
        policy: &H,
        msg: &HighlightSet,
    ) -> Result<Self> {
        msg.check_dim(self.dim)?;
        let mut keep = Vec::new();
        for (i, x) in self.support.iter().enumerate() {
            if !msg.matches(x) {
                continue;
            }
            let mut chosen = policy.select(x)?;
            chosen.sort_unstable();
            if chosen == msg.indices() {
                keep.push(i);
            }
        }
        self.restrict(&keep)
    }

    /// Marginal distribution of the coordinates `coords` (in that order),
    /// merging points that coincide after projection.
    pub fn marginal(&self, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("empty coordinate list".into()));
        }
        if let Some(&bad) = coords.iter().find(|&&j| j >= self.dim) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {bad} out of range for dimension {}",
                self.dim
            )));
        }
        let mut support: Vec<Vec<f64>> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (x, p) in self.iter() {
            let y: Vec<f64> = coords.iter().map(|&j| x[j]).collect();
            match support.iter().position(|s| same_point(s, &y)) {
                Some(pos) => probs[pos] += p,
                None => {
                    support.push(y);
                    probs.push(p);
                }
            }
        }
        Ok(Self {
            dim: coords.len(),
            support,
            probs,
        })
    }

    /// Position of `x` in the support, if present.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.support.iter().position(|s| same_point(s, x))
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&u, &v)| values_match(u, v))
}

impl PriorSampler for DiscreteBelief {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in self.iter() {
            acc += p;
            if u < acc {
                return x.to_vec();
            }
        }
        // Rounding left a sliver above the cumulative sum: take the last
        // point with positive mass.
        let last = self
            .probs
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("probabilities sum to one");
        self.support[last].clone()
    }
}

/// Naive posterior P(· | X_I = values).
pub fn naive_posterior_discrete(prior: &DiscreteBelief, msg: &HighlightSet) -> Result<DiscreteBelief> {
    prior.condition(msg)
}

/// Sophisticated posterior P(· | X_I = values, σ(X) = I).
pub fn sophisticated_posterior_discrete<H: Highlighter + ?Sized>(
    prior: &DiscreteBelief,
    policy: &H,
    msg: &HighlightSet,
) -> Result<DiscreteBelief> {
    prior.condition_on_selection(policy, msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{FixedSet, FnHighlighter};

    fn example4() -> DiscreteBelief {
        DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn parity_states(b: f64) -> DiscreteBelief {
        DiscreteBelief::uniform(vec![
            vec![0.0, 0.0],
            vec![0.0, b],
            vec![1.0, 0.0],
            vec![1.0, b],
        ])
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(DiscreteBelief::new(vec![], vec![]).is_err());
        assert!(DiscreteBelief::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(DiscreteBelief::new(vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(DiscreteBelief::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(DiscreteBelief::new(vec![vec![0.0], vec![1.0]], vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn naive_conditioning_matches_enumeration() {
        let post = example4()
            .condition(&HighlightSet::new(vec![0], vec![0.0]).unwrap())
            .unwrap();
        assert_eq!(post.len(), 2);
        assert_eq!(post.mean(), vec![0.0, 0.5]);

        let post = parity_states(3.0)
            .condition(&HighlightSet::new(vec![0], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(post.support(), &[vec![1.0, 0.0], vec![1.0, 3.0]]);
        assert_eq!(post.probs(), &[0.5, 0.5]);

        let prior = example4();
        assert_eq!(prior.condition(&HighlightSet::empty()).unwrap(), prior);
    }

    #[test]
    fn unattainable_message_is_an_error() {
        let err = example4()
            .condition(&HighlightSet::new(vec![0], vec![0.5]).unwrap())
            .unwrap_err();
        assert_eq!(err, Error::EmptyConditioningSet);
    }

    #[test]
    fn sophisticated_conditioning_uses_selection() {
        // Reveal the first coordinate iff the second is zero.
        let parity = FnHighlighter::new("parity", 1, |x: &[f64]| {
            Ok(if x[1] == 0.0 { vec![0] } else { vec![1] })
        });
        let prior = parity_states(3.0);
        let post = prior
            .condition_on_selection(&parity, &HighlightSet::new(vec![0], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(post.support(), &[vec![1.0, 0.0]]);

        let constant = FixedSet::new(vec![1]);
        let msg = HighlightSet::new(vec![1], vec![0.0]).unwrap();
        assert_eq!(
            prior.condition_on_selection(&constant, &msg).unwrap(),
            prior.condition(&msg).unwrap()
        );
    }

    #[test]
    fn price_of_simplicity_policy_pins_the_state() {
        // Reveal the first coordinate when both agree, the second otherwise.
        let prior = DiscreteBelief::uniform(vec![
            vec![0.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 0.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let policy = FnHighlighter::new("agree", 1, |x: &[f64]| {
            Ok(if x[0] == x[1] { vec![0] } else { vec![1] })
        });
        let post = prior
            .condition_on_selection(&policy, &HighlightSet::new(vec![1], vec![2.0]).unwrap())
            .unwrap();
        assert_eq!(post.support(), &[vec![0.0, 2.0]]);
    }

    #[test]
    fn marginal_merges_points() {
        let m = parity_states(3.0).marginal(&[0]).unwrap();
        assert_eq!(m.support(), &[vec![0.0], vec![1.0]]);
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn bernoulli_enumeration() {
        let b = BernoulliBelief::new(vec![0.2, 0.7]).unwrap();
        let table = DiscreteBelief::from_bernoulli(&b).unwrap();
        assert_eq!(table.len(), 4);
        let mean = table.mean();
        assert!((mean[0] - 0.2).abs() < 1e-15 && (mean[1] - 0.7).abs() < 1e-15);
    }
}
