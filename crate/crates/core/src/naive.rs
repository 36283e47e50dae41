//! Naive updating as an incremental state machine.
//!
//! Every policy that scores candidate sets by the realized loss of a naive
//! receiver goes through [`NaiveModel`]: start from the prior, reveal
//! coordinates one at a time, and read off the Bayes action. Implementations
//! exist for the three prior families; the Gaussian one updates the
//! conditional mean and covariance by rank-one steps.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::belief::{BernoulliBelief, DiscreteBelief, GaussianBelief, HighlightSet};
use crate::error::{check_dim, Error, Result};
use crate::loss::{action_from_mean, bayes_action, dot, realized_loss, Action, LossSpec, QuadraticForm};

/// A weighted sample of instances used to train fixed policies.
#[derive(Debug)]
pub struct TrainingSample {
    dim: usize,
    rows: Vec<Vec<f64>>,
    weights: Vec<f64>,
    moments: OnceLock<(DVector<f64>, DMatrix<f64>)>,
}

impl Clone for TrainingSample {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            rows: self.rows.clone(),
            weights: self.weights.clone(),
            moments: OnceLock::new(),
        }
    }
}

impl TrainingSample {
    /// Equally weighted rows.
    pub fn uniform(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        Self::weighted(rows, vec![1.0; n])
    }

    /// Rows with nonnegative weights (normalized here).
    pub fn weighted(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty training sample".into()));
        }
        check_dim(rows.len(), weights.len())?;
        let dim = rows[0].len();
        for r in &rows {
            check_dim(dim, r.len())?;
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument(
                "sample weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(Self {
            dim,
            rows,
            weights: weights.iter().map(|w| w / total).collect(),
            moments: OnceLock::new(),
        })
    }

    /// The support of a discrete prior, weighted by its probabilities; fixed
    /// policies trained on it optimize the exact prior risk.
    pub fn from_discrete(prior: &DiscreteBelief) -> Self {
        Self {
            dim: prior.dim(),
            rows: prior.support().to_vec(),
            weights: prior.probs().to_vec(),
            moments: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted mean and covariance (normalized by the total weight).
    fn moments(&self) -> &(DVector<f64>, DMatrix<f64>) {
        self.moments.get_or_init(|| {
            let d = self.dim;
            let mut mean = DVector::zeros(d);
            for (r, &w) in self.rows.iter().zip(&self.weights) {
                for j in 0..d {
                    mean[j] += w * r[j];
                }
            }
            let mut cov = DMatrix::zeros(d, d);
            let mut centered = vec![0.0; d];
            for (r, &w) in self.rows.iter().zip(&self.weights) {
                for j in 0..d {
                    centered[j] = r[j] - mean[j];
                }
                for a in 0..d {
                    let wa = w * centered[a];
                    for b in a..d {
                        cov[(a, b)] += wa * centered[b];
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[(a, b)] = cov[(b, a)];
                }
            }
            (mean, cov)
        })
    }

    /// Second-moment matrix E_w[(x − c)(x − c)ᵀ] about `center`.
    pub fn moment_about(&self, center: &DVector<f64>) -> DMatrix<f64> {
        let (mean, cov) = self.moments();
        let shift = mean - center;
        cov + &shift * shift.transpose()
    }

    /// Weighted average of `f` over the rows, evaluated in parallel.
    pub(crate) fn average<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let values: Vec<f64> = self
            .rows
            .par_iter()
            .map(|r| f(r))
            .collect::<Result<_>>()?;
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }
}

/// A prior that a naive receiver can condition on one coordinate at a time.
pub trait NaiveModel: Sync {
    /// Posterior after some reveals.
    type State: Clone + Send + Sync;

    fn dim(&self) -> usize;

    fn marginal_means(&self) -> Vec<f64>;

    fn marginal_variances(&self) -> Vec<f64>;

    /// The prior, nothing revealed.
    fn initial_state(&self) -> Self::State;

    /// Conditions on coordinate `index` taking `value`.
    fn reveal(&self, state: &Self::State, index: usize, value: f64) -> Result<Self::State>;

    /// Bayes action of the current posterior.
    fn action(&self, state: &Self::State, loss: &LossSpec) -> Result<Action>;

    /// Realized loss of the current Bayes action at instance `x`.
    fn state_loss(&self, state: &Self::State, x: &[f64], loss: &LossSpec) -> Result<f64> {
        realized_loss(&self.action(state, loss)?, x, None, loss)
    }

    /// Realized loss after additionally revealing each candidate coordinate.
    fn losses_after_reveal(
        &self,
        state: &Self::State,
        x: &[f64],
        loss: &LossSpec,
        candidates: &[usize],
    ) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|&j| {
                let next = self.reveal(state, j, x[j])?;
                self.state_loss(&next, x, loss)
            })
            .collect()
    }

    /// Posterior after revealing `indices` of `x`.
    fn state_for(&self, indices: &[usize], x: &[f64]) -> Result<Self::State> {
        check_dim(self.dim(), x.len())?;
        let mut state = self.initial_state();
        for &j in indices {
            state = self.reveal(&state, j, x[j])?;
        }
        Ok(state)
    }

    /// Realized naive loss L^N(I; x).
    fn naive_loss(&self, indices: &[usize], x: &[f64], loss: &LossSpec) -> Result<f64> {
        let state = self.state_for(indices, x)?;
        self.state_loss(&state, x, loss)
    }

    /// The naive receiver's action for a message.
    fn respond(&self, msg: &HighlightSet, loss: &LossSpec) -> Result<Action> {
        msg.check_dim(self.dim())?;
        let mut state = self.initial_state();
        for (j, v) in msg.iter() {
            state = self.reveal(&state, j, v)?;
        }
        self.action(&state, loss)
    }

    /// Average naive loss over a sample when always revealing `indices`.
    fn fixed_set_loss(&self, indices: &[usize], sample: &TrainingSample, loss: &LossSpec) -> Result<f64> {
        check_dim(self.dim(), sample.dim())?;
        sample.average(|x| self.naive_loss(indices, x, loss))
    }
}

/// Naive state of a discrete prior: the support positions still consistent
/// with the revealed values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    members: Vec<usize>,
}

impl NaiveModel for DiscreteBelief {
    type State = DiscreteState;

    fn dim(&self) -> usize {
        DiscreteBelief::dim(self)
    }

    fn marginal_means(&self) -> Vec<f64> {
        self.mean()
    }

    fn marginal_variances(&self) -> Vec<f64> {
        self.variances()
    }

    fn initial_state(&self) -> DiscreteState {
        DiscreteState {
            members: (0..self.len()).filter(|&i| self.probs()[i] > 0.0).collect(),
        }
    }

    fn reveal(&self, state: &DiscreteState, index: usize, value: f64) -> Result<DiscreteState> {
        if index >= NaiveModel::dim(self) {
            return Err(Error::InvalidArgument(format!("index {index} out of range")));
        }
        let members: Vec<usize> = state
            .members
            .iter()
            .copied()
            .filter(|&i| crate::belief::values_match(self.support()[i][index], value))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyConditioningSet);
        }
        Ok(DiscreteState { members })
    }

    fn action(&self, state: &DiscreteState, loss: &LossSpec) -> Result<Action> {
        bayes_action(&self.restrict(&state.members)?, loss)
    }
}

/// Naive state of independent binary features: the revealed values.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliState {
    values: Vec<Option<f64>>,
}

impl NaiveModel for BernoulliBelief {
    type State = BernoulliState;

    fn dim(&self) -> usize {
        BernoulliBelief::dim(self)
    }

    fn marginal_means(&self) -> Vec<f64> {
        self.means().to_vec()
    }

    fn marginal_variances(&self) -> Vec<f64> {
        self.variances()
    }

    fn initial_state(&self) -> BernoulliState {
        BernoulliState {
            values: vec![None; BernoulliBelief::dim(self)],
        }
    }

    fn reveal(&self, state: &BernoulliState, index: usize, value: f64) -> Result<BernoulliState> {
        if index >= state.values.len() {
            return Err(Error::InvalidArgument(format!("index {index} out of range")));
        }
        let p = self.means()[index];
        let possible = (value == 1.0 && p > 0.0) || (value == 0.0 && p < 1.0);
        if !possible {
            return Err(Error::EmptyConditioningSet);
        }
        let mut next = state.clone();
        next.values[index] = Some(value);
        Ok(next)
    }

    fn action(&self, state: &BernoulliState, loss: &LossSpec) -> Result<Action> {
        let x_hat = state
            .values
            .iter()
            .zip(self.means())
            .map(|(v, &p)| v.unwrap_or(p))
            .collect();
        action_from_mean(x_hat, loss)
    }

    fn losses_after_reveal(
        &self,
        state: &BernoulliState,
        x: &[f64],
        loss: &LossSpec,
        candidates: &[usize],
    ) -> Result<Vec<f64>> {
        let d = BernoulliBelief::dim(self);
        check_dim(d, x.len())?;
        let Some(form) = loss.quadratic_form(d) else {
            return candidates
                .iter()
                .map(|&j| {
                    let next = self.reveal(state, j, x[j])?;
                    self.state_loss(&next, x, loss)
                })
                .collect();
        };
        let residual: Vec<f64> = (0..d)
            .map(|j| match state.values[j] {
                Some(v) => v - x[j],
                None => self.means()[j] - x[j],
            })
            .collect();
        let diag_total: f64 = (0..d).map(|j| form.diag[j] * residual[j].powi(2)).sum();
        let projection = form.rank_one.as_ref().map(|(_, v)| dot(v, &residual));
        candidates
            .iter()
            .map(|&j| {
                let r = residual[j];
                let mut value = diag_total - form.diag[j] * r * r;
                if let (Some((coef, v)), Some(s)) = (&form.rank_one, projection) {
                    value += coef * (s - v[j] * r).powi(2);
                }
                Ok(value.max(0.0))
            })
            .collect()
    }
}

/// Naive state of a Gaussian prior: conditional mean and covariance given
/// ridge-regularized observations of the revealed coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    revealed: Vec<Option<f64>>,
}

impl GaussianState {
    /// The reconstruction: conditional mean, with revealed coordinates set
    /// to their values.
    pub fn reconstruction(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.revealed)
            .map(|(&m, v)| v.unwrap_or(m))
            .collect()
    }
}

impl NaiveModel for GaussianBelief {
    type State = GaussianState;

    fn dim(&self) -> usize {
        GaussianBelief::dim(self)
    }

    fn marginal_means(&self) -> Vec<f64> {
        self.mean().iter().copied().collect()
    }

    fn marginal_variances(&self) -> Vec<f64> {
        self.variances()
    }

    fn initial_state(&self) -> GaussianState {
        GaussianState {
            mean: self.mean().clone(),
            cov: self.cov().clone(),
            revealed: vec![None; GaussianBelief::dim(self)],
        }
    }

    fn reveal(&self, state: &GaussianState, index: usize, value: f64) -> Result<GaussianState> {
        let d = GaussianBelief::dim(self);
        if index >= d {
            return Err(Error::InvalidArgument(format!("index {index} out of range")));
        }
        let pivot = state.cov[(index, index)] + self.ridge();
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(Error::SingularConditioning);
        }
        let column: Vec<f64> = (0..d).map(|i| state.cov[(i, index)]).collect();
        let innovation = value - state.mean[index];
        let mut next = state.clone();
        for a in 0..d {
            next.mean[a] += column[a] / pivot * innovation;
            for b in 0..d {
                next.cov[(a, b)] -= column[a] * column[b] / pivot;
            }
        }
        next.revealed[index] = Some(value);
        Ok(next)
    }

    fn action(&self, state: &GaussianState, loss: &LossSpec) -> Result<Action> {
        action_from_mean(state.reconstruction(), loss)
    }

    fn losses_after_reveal(
        &self,
        state: &GaussianState,
        x: &[f64],
        loss: &LossSpec,
        candidates: &[usize],
    ) -> Result<Vec<f64>> {
        let d = GaussianBelief::dim(self);
        check_dim(d, x.len())?;
        let Some(form) = loss.quadratic_form(d) else {
            return Err(Error::InvalidLoss(
                "Gaussian models need an outcome linear in the features".into(),
            ));
        };
        let lambda = self.ridge();
        let base = state.reconstruction();
        let mut residual = vec![0.0; d];
        candidates
            .iter()
            .map(|&j| {
                let pivot = state.cov[(j, j)] + lambda;
                if !(pivot > 0.0 && pivot.is_finite()) {
                    return Err(Error::SingularConditioning);
                }
                let step = (x[j] - state.mean[j]) / pivot;
                for i in 0..d {
                    residual[i] = if i == j || state.revealed[i].is_some() {
                        base[i] - x[i]
                    } else {
                        state.mean[i] + state.cov[(i, j)] * step - x[i]
                    };
                }
                residual[j] = 0.0;
                Ok(form.eval(&residual))
            })
            .collect()
    }

    fn fixed_set_loss(&self, indices: &[usize], sample: &TrainingSample, loss: &LossSpec) -> Result<f64> {
        let d = GaussianBelief::dim(self);
        check_dim(d, sample.dim())?;
        let Some(form) = loss.quadratic_form(d) else {
            return Err(Error::InvalidLoss(
                "Gaussian models need an outcome linear in the features".into(),
            ));
        };
        let moment = sample.moment_about(self.mean());
        gaussian_fixed_loss(self, indices, &moment, &form)
    }
}

/// Expected quadratic-form loss of the ridge-regularized conditional-mean
/// reconstruction when `indices` are always revealed, with the expectation
/// taken under second moment `moment` about the prior mean.
fn gaussian_fixed_loss(
    prior: &GaussianBelief,
    indices: &[usize],
    moment: &DMatrix<f64>,
    form: &QuadraticForm,
) -> Result<f64> {
    let d = prior.dim();
    let mut revealed = vec![false; d];
    for &j in indices {
        if j >= d || revealed[j] {
            return Err(Error::InvalidArgument(format!("bad fixed index {j}")));
        }
        revealed[j] = true;
    }
    let unrevealed: Vec<usize> = (0..d).filter(|&j| !revealed[j]).collect();
    if unrevealed.is_empty() {
        return Ok(0.0);
    }
    let m = indices.len();
    let cov = prior.cov();
    // Gain K = Σ_UI (Σ_II + λI)⁻¹, so residual_U = K D_I − D_U with D = x − μ.
    let gain = if m == 0 {
        DMatrix::zeros(unrevealed.len(), 0)
    } else {
        let lambda = prior.ridge();
        let block = DMatrix::from_fn(m, m, |a, b| cov[(indices[a], indices[b])] + if a == b { lambda } else { 0.0 });
        let chol = block.cholesky().ok_or(Error::SingularConditioning)?;
        let cross = DMatrix::from_fn(m, unrevealed.len(), |a, b| cov[(indices[a], unrevealed[b])]);
        chol.solve(&cross).transpose()
    };
    let s_ii = DMatrix::from_fn(m, m, |a, b| moment[(indices[a], indices[b])]);
    let s_iu = DMatrix::from_fn(m, unrevealed.len(), |a, b| moment[(indices[a], unrevealed[b])]);
    let ks = &gain * &s_ii;
    let mut total = 0.0;
    for (u_pos, &u) in unrevealed.iter().enumerate() {
        if form.diag[u] == 0.0 {
            continue;
        }
        let mut second = moment[(u, u)];
        for t in 0..m {
            second += ks[(u_pos, t)] * gain[(u_pos, t)] - 2.0 * gain[(u_pos, t)] * s_iu[(t, u_pos)];
        }
        total += form.diag[u] * second;
    }
    if let Some((coef, v)) = &form.rank_one {
        let v_u = DVector::from_iterator(unrevealed.len(), unrevealed.iter().map(|&u| v[u]));
        let a = gain.transpose() * &v_u;
        let s_uu_v = DVector::from_iterator(
            unrevealed.len(),
            unrevealed
                .iter()
                .map(|&u| unrevealed.iter().zip(v_u.iter()).map(|(&w, vw)| moment[(u, w)] * vw).sum::<f64>()),
        );
        let quad = (a.transpose() * &s_ii * &a)[(0, 0)] - 2.0 * (a.transpose() * &s_iu * &v_u)[(0, 0)]
            + v_u.dot(&s_uu_v);
        total += coef * quad;
    }
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::PriorSampler;
    use crate::seeded_stream;

    fn correlated3() -> GaussianBelief {
        GaussianBelief::from_rows(
            vec![0.5, -1.0, 2.0],
            vec![
                vec![2.0, 0.8, 0.3],
                vec![0.8, 1.0, -0.4],
                vec![0.3, -0.4, 1.5],
            ],
        )
        .unwrap()
    }

    #[test]
    fn sequential_gaussian_matches_batch() {
        let prior = correlated3();
        let x = [1.0, 0.2, -0.7];
        let state = prior.state_for(&[2, 0], &x).unwrap();
        let batch = prior
            .conditional_mean(&HighlightSet::reveal(&[0, 2], &x).unwrap())
            .unwrap();
        for (a, b) in state.reconstruction().iter().zip(&batch) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let full = prior.condition(&HighlightSet::reveal(&[0, 2], &x).unwrap()).unwrap();
        assert!((state.cov[(1, 1)] - full.cov()[(1, 1)]).abs() < 1e-10);
    }

    #[test]
    fn candidate_losses_match_full_reveal() {
        let prior = correlated3();
        let x = [1.0, 0.2, -0.7];
        let loss = LossSpec::SquaredRecovery;
        let state = prior.state_for(&[1], &x).unwrap();
        let fast = prior.losses_after_reveal(&state, &x, &loss, &[0, 2]).unwrap();
        for (pos, &j) in [0usize, 2].iter().enumerate() {
            let slow = prior.naive_loss(&[1, j], &x, &loss).unwrap();
            assert!((fast[pos] - slow).abs() < 1e-10);
        }
    }

    #[test]
    fn bernoulli_candidate_losses_match_full_reveal() {
        let prior = BernoulliBelief::new(vec![0.2, 0.6, 0.9, 0.5]).unwrap();
        let x = [1.0, 0.0, 1.0, 1.0];
        let loss = LossSpec::outcome_targeted(
            0.3,
            crate::OutcomeModel::Linear {
                intercept: 0.0,
                coefficients: vec![1.0, -2.0, 0.5, 0.0],
            },
        )
        .unwrap();
        let state = prior.state_for(&[3], &x).unwrap();
        let fast = prior.losses_after_reveal(&state, &x, &loss, &[0, 1, 2]).unwrap();
        for (pos, j) in [0usize, 1, 2].into_iter().enumerate() {
            let slow = prior.naive_loss(&[3, j], &x, &loss).unwrap();
            assert!((fast[pos] - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_fixed_loss_matches_row_average() {
        let prior = correlated3();
        let mut rng = seeded_stream(5, 0);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| prior.sample(&mut rng)).collect();
        let sample = TrainingSample::uniform(rows).unwrap();
        let losses = [
            LossSpec::SquaredRecovery,
            LossSpec::outcome_targeted(
                0.5,
                crate::OutcomeModel::Linear {
                    intercept: 1.0,
                    coefficients: vec![0.3, -1.0, 2.0],
                },
            )
            .unwrap(),
            LossSpec::weighted_normalized(0.5, vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 1.5], 2).unwrap(),
        ];
        for loss in &losses {
            for set in [vec![], vec![1], vec![0, 2], vec![0, 1, 2]] {
                let closed = prior.fixed_set_loss(&set, &sample, loss).unwrap();
                let direct = sample.average(|x| prior.naive_loss(&set, x, loss)).unwrap();
                assert!((closed - direct).abs() < 1e-9 * (1.0 + direct), "{set:?}: {closed} vs {direct}");
            }
        }
    }

    #[test]
    fn discrete_naive_loss() {
        let prior =
            DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let loss = LossSpec::SquaredRecovery;
        let x = [0.0, 0.0];
        assert!((prior.naive_loss(&[], &x, &loss).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((prior.naive_loss(&[0], &x, &loss).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(prior.naive_loss(&[0, 1], &x, &loss).unwrap(), 0.0);
    }
}
