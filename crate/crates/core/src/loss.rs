//! Quadratic losses, Bayes actions and realized losses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::belief::{values_match, BernoulliBelief, DiscreteBelief, GaussianBelief};
use crate::error::{check_dim, Error, Result};

/// The conditional mean E[Y | X = x] of the outcome the human predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutcomeModel {
    /// `intercept + coefficients · x`, e.g. the linear regression implied by
    /// a joint Gaussian fit.
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    /// A lookup table for discrete priors.
    Table { points: Vec<Vec<f64>>, values: Vec<f64> },
}

impl OutcomeModel {
    /// E[Y | X = x].
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Linear {
                intercept,
                coefficients,
            } => {
                check_dim(coefficients.len(), x.len())?;
                Ok(intercept + dot(coefficients, x))
            }
            Self::Table { points, values } => points
                .iter()
                .position(|p| p.len() == x.len() && p.iter().zip(x).all(|(&a, &b)| values_match(a, b)))
                .map(|i| values[i])
                .ok_or_else(|| Error::InvalidLoss("instance missing from outcome table".into())),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Linear { coefficients, .. } => check_dim(dim, coefficients.len()),
            Self::Table { points, values } => {
                check_dim(points.len(), values.len())?;
                for p in points {
                    check_dim(dim, p.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Which quadratic loss the human is scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// ‖x̂ − x‖².
    SquaredRecovery,
    /// (1 − α)‖x̂ − x‖² + α (ŷ − E[Y|X])².
    OutcomeTargeted { alpha: f64, outcome: OutcomeModel },
    /// α (ŷ − y)²/σ²_y + (1 − α) Σ_j w_j (x̂_j − x_j)²/σ²_j / Σ_j w_j, where
    /// y is coordinate `target` of the instance and the sums skip it.
    WeightedNormalized {
        alpha: f64,
        weights: Vec<f64>,
        scales: Vec<f64>,
        target: usize,
    },
}

/// The human's response: a reconstruction of the features and, for losses
/// with an outcome term, a prediction of the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub x_hat: Vec<f64>,
    pub y_hat: Option<f64>,
}

/// Σ diag_j r_j² + coef · (v · r)², the form every residual-based loss takes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub diag: Vec<f64>,
    pub rank_one: Option<(f64, Vec<f64>)>,
}

impl QuadraticForm {
    pub fn eval(&self, residual: &[f64]) -> f64 {
        let mut total: f64 = self
            .diag
            .iter()
            .zip(residual)
            .map(|(c, r)| c * r * r)
            .sum();
        if let Some((coef, v)) = &self.rank_one {
            total += coef * dot(v, residual).powi(2);
        }
        total
    }

    /// Weight the form puts on a unit residual in coordinate `j` alone.
    pub fn coordinate_weight(&self, j: usize) -> f64 {
        self.diag[j]
            + self
                .rank_one
                .as_ref()
                .map_or(0.0, |(coef, v)| coef * v[j] * v[j])
    }
}

impl LossSpec {
    /// Outcome-targeted recovery with weight `alpha` on the outcome term.
    pub fn outcome_targeted(alpha: f64, outcome: OutcomeModel) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::OutcomeTargeted { alpha, outcome })
    }

    /// Weighted, variance-normalized loss.
    ///
    /// Coordinates with zero (or non-finite) scale variance get scale 1 and
    /// weight 0, so constant columns drop out of the loss. The target's own
    /// weight is ignored.
    pub fn weighted_normalized(
        alpha: f64,
        weights: Vec<f64>,
        scales: Vec<f64>,
        target: usize,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_dim(weights.len(), scales.len())?;
        if target >= weights.len() {
            return Err(Error::InvalidLoss(format!(
                "target {target} out of range for dimension {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidLoss("weights must be finite and nonnegative".into()));
        }
        if !(scales[target] > 0.0 && scales[target].is_finite()) {
            return Err(Error::InvalidLoss("target has zero variance".into()));
        }
        let mut weights = weights;
        let mut scales = scales;
        for j in 0..weights.len() {
            if !(scales[j] > 0.0 && scales[j].is_finite()) {
                scales[j] = 1.0;
                weights[j] = 0.0;
            }
        }
        let spec = Self::WeightedNormalized {
            alpha,
            weights,
            scales,
            target,
        };
        spec.validate(spec_dim(&spec).unwrap_or(0))?;
        Ok(spec)
    }

    /// Checks the invariants against a feature dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::SquaredRecovery => Ok(()),
            Self::OutcomeTargeted { alpha, outcome } => {
                check_alpha(*alpha)?;
                outcome.validate(dim)
            }
            Self::WeightedNormalized {
                alpha,
                weights,
                scales,
                target,
            } => {
                check_alpha(*alpha)?;
                check_dim(dim, weights.len())?;
                check_dim(dim, scales.len())?;
                if *target >= dim {
                    return Err(Error::InvalidLoss("target out of range".into()));
                }
                if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::InvalidLoss("scale variances must be positive".into()));
                }
                if feature_weight_total(weights, *target) <= 0.0 {
                    return Err(Error::InvalidLoss(
                        "at least one non-target weight must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether actions carry an outcome prediction.
    pub fn requires_outcome(&self) -> bool {
        !matches!(self, Self::SquaredRecovery)
    }

    /// The loss as a quadratic form in the residual x̂ − x, available when
    /// the outcome prediction is itself linear in the reconstruction. `None`
    /// for table outcome models.
    pub fn quadratic_form(&self, dim: usize) -> Option<QuadraticForm> {
        match self {
            Self::SquaredRecovery => Some(QuadraticForm {
                diag: vec![1.0; dim],
                rank_one: None,
            }),
            Self::OutcomeTargeted {
                alpha,
                outcome: OutcomeModel::Linear { coefficients, .. },
            } => Some(QuadraticForm {
                diag: vec![1.0 - alpha; dim],
                rank_one: (*alpha > 0.0).then(|| (*alpha, coefficients.clone())),
            }),
            Self::OutcomeTargeted { .. } => None,
            Self::WeightedNormalized {
                alpha,
                weights,
                scales,
                target,
            } => {
                let total = feature_weight_total(weights, *target);
                let diag = (0..dim)
                    .map(|j| {
                        if j == *target {
                            alpha / scales[j]
                        } else {
                            (1.0 - alpha) * weights[j] / scales[j] / total
                        }
                    })
                    .collect();
                Some(QuadraticForm {
                    diag,
                    rank_one: None,
                })
            }
        }
    }
}

fn spec_dim(spec: &LossSpec) -> Option<usize> {
    match spec {
        LossSpec::WeightedNormalized { weights, .. } => Some(weights.len()),
        _ => None,
    }
}

fn feature_weight_total(weights: &[f64], target: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, w)| w)
        .sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidLoss(format!("alpha {alpha} outside [0, 1]")))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// What a belief must provide for the Bayes action under a quadratic loss.
pub trait PosteriorMean {
    fn posterior_mean(&self) -> Vec<f64>;

    /// E[E[Y|X]] under the belief.
    fn expected_outcome(&self, outcome: &OutcomeModel) -> Result<f64>;
}

impl PosteriorMean for DiscreteBelief {
    fn posterior_mean(&self) -> Vec<f64> {
        self.mean()
    }

    fn expected_outcome(&self, outcome: &OutcomeModel) -> Result<f64> {
        let mut total = 0.0;
        for (x, p) in self.iter() {
            if p > 0.0 {
                total += p * outcome.evaluate(x)?;
            }
        }
        Ok(total)
    }
}

impl PosteriorMean for BernoulliBelief {
    fn posterior_mean(&self) -> Vec<f64> {
        self.means().to_vec()
    }

    fn expected_outcome(&self, outcome: &OutcomeModel) -> Result<f64> {
        match outcome {
            OutcomeModel::Linear { .. } => outcome.evaluate(self.means()),
            OutcomeModel::Table { .. } => DiscreteBelief::from_bernoulli(self)?.expected_outcome(outcome),
        }
    }
}

impl PosteriorMean for GaussianBelief {
    fn posterior_mean(&self) -> Vec<f64> {
        self.mean().iter().copied().collect()
    }

    fn expected_outcome(&self, outcome: &OutcomeModel) -> Result<f64> {
        match outcome {
            OutcomeModel::Linear { .. } => outcome.evaluate(self.mean().as_slice()),
            OutcomeModel::Table { .. } => Err(Error::InvalidLoss(
                "table outcome models need a discrete belief".into(),
            )),
        }
    }
}

/// The Bayes action: the posterior mean of the features plus, when the loss
/// has an outcome term, the posterior mean of the outcome.
pub fn bayes_action<B: PosteriorMean + ?Sized>(belief: &B, loss: &LossSpec) -> Result<Action> {
    let x_hat = belief.posterior_mean();
    let y_hat = match loss {
        LossSpec::SquaredRecovery => None,
        LossSpec::OutcomeTargeted { outcome, .. } => Some(belief.expected_outcome(outcome)?),
        LossSpec::WeightedNormalized { target, .. } => {
            check_target(*target, x_hat.len())?;
            Some(x_hat[*target])
        }
    };
    Ok(Action { x_hat, y_hat })
}

/// The Bayes action for a belief known only through its mean; requires the
/// outcome prediction to be linear in the features.
pub fn action_from_mean(x_hat: Vec<f64>, loss: &LossSpec) -> Result<Action> {
    let y_hat = match loss {
        LossSpec::SquaredRecovery => None,
        LossSpec::OutcomeTargeted { outcome, .. } => match outcome {
            OutcomeModel::Linear { .. } => Some(outcome.evaluate(&x_hat)?),
            OutcomeModel::Table { .. } => {
                return Err(Error::InvalidLoss(
                    "table outcome models need a discrete belief".into(),
                ))
            }
        },
        LossSpec::WeightedNormalized { target, .. } => {
            check_target(*target, x_hat.len())?;
            Some(x_hat[*target])
        }
    };
    Ok(Action { x_hat, y_hat })
}

fn check_target(target: usize, dim: usize) -> Result<()> {
    if target < dim {
        Ok(())
    } else {
        Err(Error::InvalidLoss(format!(
            "target {target} out of range for dimension {dim}"
        )))
    }
}

/// Loss of `action` when the truth is `instance`.
///
/// `truth_y` overrides the outcome: by default it is E[Y|X = instance] for
/// outcome-targeted losses and the target coordinate for weighted ones.
pub fn realized_loss(
    action: &Action,
    instance: &[f64],
    truth_y: Option<f64>,
    loss: &LossSpec,
) -> Result<f64> {
    check_dim(instance.len(), action.x_hat.len())?;
    let sq = |j: usize| (action.x_hat[j] - instance[j]).powi(2);
    match loss {
        LossSpec::SquaredRecovery => Ok((0..instance.len()).map(sq).sum()),
        LossSpec::OutcomeTargeted { alpha, outcome } => {
            let y = match truth_y {
                Some(y) => y,
                None => outcome.evaluate(instance)?,
            };
            let y_hat = action
                .y_hat
                .ok_or_else(|| Error::InvalidLoss("action lacks an outcome prediction".into()))?;
            let recovery: f64 = (0..instance.len()).map(sq).sum();
            Ok((1.0 - alpha) * recovery + alpha * (y_hat - y).powi(2))
        }
        LossSpec::WeightedNormalized {
            alpha,
            weights,
            scales,
            target,
        } => {
            check_dim(instance.len(), weights.len())?;
            let y = truth_y.unwrap_or(instance[*target]);
            let y_hat = action.y_hat.unwrap_or(action.x_hat[*target]);
            let total = feature_weight_total(weights, *target);
            let features: f64 = (0..instance.len())
                .filter(|&j| j != *target)
                .map(|j| weights[j] * sq(j) / scales[j])
                .sum();
            Ok(alpha * (y_hat - y).powi(2) / scales[*target] + (1.0 - alpha) * features / total)
        }
    }
}

/// Grid maximum of (βᵀ(a − y))² over unit vectors β.
///
/// `a` is the action's reconstruction, followed by its outcome prediction
/// when `target` is one longer. The robust (worst-case linear functional)
/// reading of squared recovery says the maximum is ‖a − y‖²; this evaluates
/// it on a hyperspherical angle grid whose per-angle resolution shrinks as
/// the dimension grows, so it is meant for low dimensions.
pub fn worst_case_equivalence_check(action: &Action, target: &[f64]) -> f64 {
    let mut a = action.x_hat.clone();
    if target.len() == a.len() + 1 {
        if let Some(y) = action.y_hat {
            a.push(y);
        }
    }
    let m = a.len().min(target.len());
    let diff: Vec<f64> = (0..m).map(|j| a[j] - target[j]).collect();
    match m {
        0 => 0.0,
        1 => diff[0] * diff[0],
        _ => {
            const BUDGET: f64 = (1u64 << 21) as f64;
            let per_angle = (BUDGET.powf(1.0 / (m - 1) as f64).floor() as usize).max(4);
            let mut best = 0.0f64;
            let mut angles = vec![0usize; m - 1];
            let mut beta = vec![0.0; m];
            loop {
                // Polar angles on [0, π], the last (azimuthal) one on [0, 2π).
                let mut sin_prod = 1.0;
                for (t, &step) in angles.iter().enumerate() {
                    let theta = if t + 1 == m - 1 {
                        2.0 * PI * step as f64 / per_angle as f64
                    } else {
                        PI * step as f64 / (per_angle - 1) as f64
                    };
                    beta[t] = sin_prod * theta.cos();
                    sin_prod *= theta.sin();
                }
                beta[m - 1] = sin_prod;
                best = best.max(dot(&beta, &diff).powi(2));
                let mut t = 0;
                loop {
                    angles[t] += 1;
                    if angles[t] < per_angle {
                        break;
                    }
                    angles[t] = 0;
                    t += 1;
                    if t == m - 1 {
                        return best;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::HighlightSet;

    #[test]
    fn point_mass_action_is_the_point() {
        let b = DiscreteBelief::point_mass(vec![1.0, -2.0]).unwrap();
        let a = bayes_action(&b, &LossSpec::SquaredRecovery).unwrap();
        assert_eq!(a.x_hat, vec![1.0, -2.0]);
        assert_eq!(a.y_hat, None);
    }

    #[test]
    fn bernoulli_action_is_the_mean() {
        let b = BernoulliBelief::new(vec![0.3, 0.9]).unwrap();
        assert_eq!(bayes_action(&b, &LossSpec::SquaredRecovery).unwrap().x_hat, vec![0.3, 0.9]);
    }

    #[test]
    fn correlated_pair_after_revealing_a_zero() {
        let prior =
            DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let post = prior
            .condition(&HighlightSet::new(vec![0], vec![0.0]).unwrap())
            .unwrap();
        let a = bayes_action(&post, &LossSpec::SquaredRecovery).unwrap();
        assert_eq!(a.x_hat, vec![0.0, 0.5]);
        let l = realized_loss(&a, &[0.0, 0.0], None, &LossSpec::SquaredRecovery).unwrap();
        assert_eq!(l, 0.25);
        assert_eq!(realized_loss(&a, &a.x_hat, None, &LossSpec::SquaredRecovery).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Action {
            x_hat: vec![0.0],
            y_hat: None,
        };
        assert!(matches!(
            realized_loss(&a, &[0.0, 1.0], None, &LossSpec::SquaredRecovery),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn outcome_targeted_mixes_terms() {
        let loss = LossSpec::outcome_targeted(
            0.25,
            OutcomeModel::Linear {
                intercept: 1.0,
                coefficients: vec![2.0, 0.0],
            },
        )
        .unwrap();
        let b = DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let a = bayes_action(&b, &loss).unwrap();
        assert_eq!(a.y_hat, Some(2.0));
        // Truth (1,1): recovery 0.5, outcome E[Y|x] = 3, (2 − 3)² = 1.
        let l = realized_loss(&a, &[1.0, 1.0], None, &loss).unwrap();
        assert!((l - (0.75 * 0.5 + 0.25 * 1.0)).abs() < 1e-15);
        let q = loss.quadratic_form(2).unwrap();
        assert!((q.eval(&[-0.5, -0.5]) - l).abs() < 1e-15);
    }

    #[test]
    fn weighted_normalized_zero_variance_column() {
        let loss = LossSpec::weighted_normalized(0.5, vec![1.0, 3.0, 0.0], vec![2.0, 0.0, 4.0], 2)
            .unwrap();
        let LossSpec::WeightedNormalized { weights, scales, .. } = &loss else {
            unreachable!()
        };
        assert_eq!(weights, &vec![1.0, 0.0, 0.0]);
        assert_eq!(scales, &vec![2.0, 1.0, 4.0]);
        let a = Action {
            x_hat: vec![2.0, 5.0, 2.0],
            y_hat: Some(2.0),
        };
        // 0.5·(2−0)²/4 + 0.5·1·(2−0)²/2/1
        let l = realized_loss(&a, &[0.0, 0.0, 0.0], None, &loss).unwrap();
        assert!((l - (0.5 + 1.0)).abs() < 1e-15);
        assert!(LossSpec::weighted_normalized(0.5, vec![0.0, 0.0], vec![1.0, 1.0], 0).is_err());
        assert!(LossSpec::weighted_normalized(1.5, vec![1.0, 1.0], vec![1.0, 1.0], 0).is_err());
    }

    #[test]
    fn worst_case_grid_matches_norm() {
        let a = |v: Vec<f64>| Action { x_hat: v, y_hat: None };
        assert!((worst_case_equivalence_check(&a(vec![1.0, 0.0]), &[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((worst_case_equivalence_check(&a(vec![3.0, 4.0]), &[0.0, 0.0]) - 25.0).abs() < 1e-3);
        assert_eq!(worst_case_equivalence_check(&a(vec![0.7, 0.1]), &[0.7, 0.1]), 0.0);
        let v = worst_case_equivalence_check(&a(vec![1.0, 2.0, 2.0]), &[0.0, 0.0, 0.0]);
        assert!((v - 9.0).abs() < 1e-3, "{v}");
    }
}
