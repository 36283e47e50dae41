use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::belief::{HighlightSet, PriorSampler};
use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-8;
const RIDGE_FACTOR: f64 = 1e-8;
const RIDGE_FLOOR: f64 = 1e-12;

/// A multivariate normal prior.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: OnceLock<DMatrix<f64>>,
}

impl PartialEq for GaussianBelief {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianBelief {
    /// Validates symmetry (relative 1e-10) and positive semidefiniteness
    /// (smallest eigenvalue at least −1e-8, relative to the largest variance)
    /// and stores the symmetrized covariance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidBelief("no features".into()));
        }
        if !cov.is_square() {
            return Err(Error::InvalidBelief("covariance is not square".into()));
        }
        check_dim(d, cov.nrows())?;
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBelief("non-finite mean or covariance".into()));
        }
        let scale = cov.iter().fold(1f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::InvalidBelief(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let min_eig = cov.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -PSD_TOLERANCE * scale {
            return Err(Error::InvalidBelief(format!(
                "covariance has negative eigenvalue {min_eig}"
            )));
        }
        Ok(Self::unchecked(mean, cov))
    }

    /// Convenience constructor from plain vectors (row-major covariance).
    pub fn from_rows(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        check_dim(d, cov.len())?;
        for row in &cov {
            check_dim(d, row.len())?;
        }
        let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        Self::new(DVector::from_vec(mean), cov)
    }

    /// Independent standard normals.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d))
    }

    fn unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            mean,
            cov,
            factor: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn variances(&self) -> Vec<f64> {
        self.cov.diagonal().iter().copied().collect()
    }

    /// Ridge added to the conditioning block: 1e-8 × trace(Σ)/d, floored at
    /// 1e-12 so that degenerate (zero-covariance) priors still condition.
    pub fn ridge(&self) -> f64 {
        (RIDGE_FACTOR * self.cov.trace() / self.dim() as f64).max(RIDGE_FLOOR)
    }

    /// Conditional Gaussian given the message, embedded back into `d`
    /// coordinates with revealed coordinates fixed and zero variance.
    pub fn condition(&self, msg: &HighlightSet) -> Result<Self> {
        let (mean, gain) = self.conditional_parts(msg)?;
        let d = self.dim();
        let revealed = revealed_mask(d, msg);
        let unrevealed: Vec<usize> = (0..d).filter(|&j| !revealed[j]).collect();
        let mut cov = DMatrix::zeros(d, d);
        if let Some((gain, idx)) = gain {
            // Σ_UU − K Σ_IU
            for (a, &u) in unrevealed.iter().enumerate() {
                for &v in &unrevealed {
                    let mut c = self.cov[(u, v)];
                    for (t, &i) in idx.iter().enumerate() {
                        c -= gain[(a, t)] * self.cov[(i, v)];
                    }
                    cov[(u, v)] = c;
                }
            }
            let sym = (&cov + cov.transpose()) * 0.5;
            cov = sym;
        } else {
            cov.copy_from(&self.cov);
        }
        Ok(Self::unchecked(DVector::from_vec(mean), cov))
    }

    /// Posterior mean only (cheaper than [`GaussianBelief::condition`]).
    pub fn conditional_mean(&self, msg: &HighlightSet) -> Result<Vec<f64>> {
        Ok(self.conditional_parts(msg)?.0)
    }

    /// Posterior mean and, when something is revealed, the gain matrix
    /// K = Σ_UI (Σ_II + λI)⁻¹ with the revealed index list.
    #[allow(clippy::type_complexity)]
    fn conditional_parts(
        &self,
        msg: &HighlightSet,
    ) -> Result<(Vec<f64>, Option<(DMatrix<f64>, Vec<usize>)>)> {
        let d = self.dim();
        msg.check_dim(d)?;
        if msg.is_empty() {
            return Ok((self.mean.iter().copied().collect(), None));
        }
        let idx = msg.indices().to_vec();
        let revealed = revealed_mask(d, msg);
        let unrevealed: Vec<usize> = (0..d).filter(|&j| !revealed[j]).collect();
        let m = idx.len();
        let lambda = self.ridge();
        let block = DMatrix::from_fn(m, m, |a, b| {
            self.cov[(idx[a], idx[b])] + if a == b { lambda } else { 0.0 }
        });
        let chol = block.cholesky().ok_or(Error::SingularConditioning)?;
        let cross = DMatrix::from_fn(m, unrevealed.len(), |a, b| self.cov[(idx[a], unrevealed[b])]);
        let gain = chol.solve(&cross).transpose();
        if gain.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularConditioning);
        }
        let innovation =
            DVector::from_iterator(m, msg.iter().map(|(j, v)| v - self.mean[j]));
        let shift = &gain * innovation;
        let mut mean: Vec<f64> = self.mean.iter().copied().collect();
        for (a, &u) in unrevealed.iter().enumerate() {
            mean[u] += shift[a];
        }
        for (j, v) in msg.iter() {
            mean[j] = v;
        }
        Ok((mean, Some((gain, idx))))
    }

    fn factor(&self) -> &DMatrix<f64> {
        self.factor.get_or_init(|| {
            let eig = self.cov.clone().symmetric_eigen();
            let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&roots)
        })
    }
}

fn revealed_mask(d: usize, msg: &HighlightSet) -> Vec<bool> {
    let mut mask = vec![false; d];
    for &j in msg.indices() {
        mask[j] = true;
    }
    mask
}

/// The conditional Gaussian of `prior` given the message.
pub fn condition_gaussian(prior: &GaussianBelief, msg: &HighlightSet) -> Result<GaussianBelief> {
    prior.condition(msg)
}

impl PriorSampler for GaussianBelief {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut *rng)));
        let x = &self.mean + self.factor() * z;
        x.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlated(rho: f64) -> GaussianBelief {
        GaussianBelief::from_rows(vec![0.0, 0.0], vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GaussianBelief::from_rows(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(GaussianBelief::from_rows(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianBelief::from_rows(vec![0.0], vec![vec![0.0]]).is_ok());
    }

    #[test]
    fn bivariate_conditioning() {
        let rho = 0.6;
        let post = correlated(rho)
            .condition(&HighlightSet::new(vec![0], vec![1.5]).unwrap())
            .unwrap();
        assert_eq!(post.mean()[0], 1.5);
        assert!((post.mean()[1] - rho * 1.5).abs() < 1e-7);
        assert!((post.cov()[(1, 1)] - (1.0 - rho * rho)).abs() < 1e-7);
        assert_eq!(post.cov()[(0, 0)], 0.0);
        assert_eq!(post.cov()[(0, 1)], 0.0);
    }

    #[test]
    fn independence_and_full_reveal() {
        let prior = GaussianBelief::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let post = prior
            .condition(&HighlightSet::new(vec![1], vec![-4.0]).unwrap())
            .unwrap();
        assert_eq!(post.mean().as_slice(), &[1.0, -4.0, 3.0]);

        let x = [0.3, -0.2, 9.0];
        let all = HighlightSet::reveal(&[0, 1, 2], &x).unwrap();
        assert_eq!(prior.conditional_mean(&all).unwrap(), x.to_vec());
    }

    #[test]
    fn conditioning_is_idempotent() {
        let prior = GaussianBelief::from_rows(
            vec![0.0, 1.0, -1.0],
            vec![
                vec![2.0, 0.5, 0.3],
                vec![0.5, 1.0, 0.2],
                vec![0.3, 0.2, 1.5],
            ],
        )
        .unwrap();
        let msg = HighlightSet::new(vec![0, 2], vec![1.0, 0.5]).unwrap();
        let once = prior.condition(&msg).unwrap();
        let twice = once.condition(&msg).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn degenerate_prior_conditions() {
        let prior = GaussianBelief::from_rows(vec![1.0, 2.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let m = prior
            .conditional_mean(&HighlightSet::new(vec![0], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(m, vec![1.0, 2.0]);
    }
}
