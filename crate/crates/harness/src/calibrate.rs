//! Fits the Gaussian prior and the weighted loss to a sample.

use highlight_core::{GaussianBelief, LossSpec};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{HarnessError, Result};

/// Fitted prior, loss and the numbers behind them.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub columns: Vec<String>,
    pub target: usize,
    /// Columns a policy may reveal, ascending.
    pub revealable: Vec<usize>,
    pub mean: Vec<f64>,
    /// Variances with divisor n, so the prior-mean action scores exactly
    /// one on the calibration rows.
    pub variances: Vec<f64>,
    /// Loss weights: |ridge coefficient| normalized to sum to one; zero for
    /// the target and for constant columns.
    pub weights: Vec<f64>,
    /// Ridge coefficients on standardized features (zero for the target).
    pub ridge_coefficients: Vec<f64>,
    pub ridge_lambda: f64,
    pub r_squared: f64,
    pub rows: usize,
    pub skipped_rows: usize,
    pub prior: GaussianBelief,
    pub loss: LossSpec,
}

/// Serializable digest of a calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub target: String,
    pub rows: usize,
    pub skipped_rows: usize,
    pub ridge_lambda: f64,
    pub r_squared: f64,
    pub revealable: Vec<String>,
    pub features: Vec<FeatureSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub ridge_coefficient: f64,
    pub weight: f64,
}

impl Calibration {
    pub fn summary(&self) -> CalibrationSummary {
        CalibrationSummary {
            target: self.columns[self.target].clone(),
            rows: self.rows,
            skipped_rows: self.skipped_rows,
            ridge_lambda: self.ridge_lambda,
            r_squared: self.r_squared,
            revealable: self.revealable.iter().map(|&j| self.columns[j].clone()).collect(),
            features: (0..self.columns.len())
                .map(|j| FeatureSummary {
                    name: self.columns[j].clone(),
                    mean: self.mean[j],
                    variance: self.variances[j],
                    ridge_coefficient: self.ridge_coefficients[j],
                    weight: self.weights[j],
                })
                .collect(),
        }
    }
}

/// Ridge fit of `y` on the columns of `x` after standardizing them (divisor
/// n); constant columns get coefficient zero. Returns the coefficients on the
/// standardized scale and the in-sample R².
pub fn ridge_standardized(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / nf).sqrt())
        .collect();
    let active: Vec<usize> = (0..p).filter(|&j| sds[j] > 0.0 && sds[j].is_finite()).collect();
    let y_mean = y.iter().sum::<f64>() / nf;
    let z = DMatrix::from_fn(n, active.len(), |i, a| {
        let j = active[a];
        (x[i][j] - means[j]) / sds[j]
    });
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let mut gram = z.transpose() * &z;
    for a in 0..active.len() {
        gram[(a, a)] += lambda;
    }
    let rhs = z.transpose() * &yc;
    let beta = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        // λ = 0 with collinear columns: fall back to a least-squares solve.
        None => gram.svd(true, true).solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(active.len())),
    };
    let fitted = &z * &beta;
    let sse: f64 = fitted.iter().zip(yc.iter()).map(|(f, v)| (v - f).powi(2)).sum();
    let sst: f64 = yc.iter().map(|v| v * v).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    let mut coef = vec![0.0; p];
    for (a, &j) in active.iter().enumerate() {
        coef[j] = beta[a];
    }
    (coef, r_squared)
}

/// Fits mean, covariance, ridge weights and the weighted loss.
pub fn calibrate(data: &Dataset, target: &str, hidden: &[String], alpha: f64, ridge_lambda: f64) -> Result<Calibration> {
    let target = data.column(target)?;
    let d = data.dim();
    let mut is_hidden = vec![false; d];
    is_hidden[target] = true;
    for name in hidden {
        is_hidden[data.column(name)?] = true;
    }
    let n = data.rows.len();
    if n < 2 {
        return Err(HarnessError::NoRows { skipped: data.skipped_rows });
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..d).map(|j| data.rows.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let mut cov = DMatrix::zeros(d, d);
    for r in &data.rows {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= nf;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let variances: Vec<f64> = (0..d).map(|j| cov[(j, j)]).collect();
    if !(variances[target] > 0.0) {
        return Err(HarnessError::InvalidConfig(format!("target column '{}' is constant", data.columns[target])));
    }

    let others: Vec<usize> = (0..d).filter(|&j| j != target).collect();
    let x: Vec<Vec<f64>> = data.rows.iter().map(|r| others.iter().map(|&j| r[j]).collect()).collect();
    let y: Vec<f64> = data.rows.iter().map(|r| r[target]).collect();
    let (coef, r_squared) = ridge_standardized(&x, &y, ridge_lambda);
    let mut ridge_coefficients = vec![0.0; d];
    for (a, &j) in others.iter().enumerate() {
        ridge_coefficients[j] = coef[a];
    }
    let total: f64 = ridge_coefficients.iter().map(|c| c.abs()).sum();
    let weights: Vec<f64> = if total > 0.0 {
        ridge_coefficients.iter().map(|c| c.abs() / total).collect()
    } else {
        // No signal at all: weigh the nonconstant features equally.
        let live = others.iter().filter(|&&j| variances[j] > 0.0).count().max(1) as f64;
        (0..d).map(|j| if j != target && variances[j] > 0.0 { 1.0 / live } else { 0.0 }).collect()
    };

    let prior = GaussianBelief::new(DVector::from_vec(mean.clone()), cov)?;
    let loss = LossSpec::weighted_normalized(alpha, weights.clone(), variances.clone(), target)?;
    Ok(Calibration {
        columns: data.columns.clone(),
        target,
        revealable: (0..d).filter(|&j| !is_hidden[j]).collect(),
        mean,
        variances,
        weights,
        ridge_coefficients,
        ridge_lambda,
        r_squared,
        rows: n,
        skipped_rows: data.skipped_rows,
        prior,
        loss,
    })
}
