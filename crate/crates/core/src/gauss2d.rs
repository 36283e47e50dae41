//! Two independent standard normal features, bandwidth one.
//!
//! The naive receiver predicts 0 for the hidden feature, so the best naive
//! policy reveals the larger |x_j| and its risk is E[min{X₁², X₂²}] = 1 − 2/π.
//! A sophisticated receiver can use any pair of predictors: one for the
//! second feature given the first (used when the first is revealed) and one
//! for the first given the second. The sender then reveals whichever leaves
//! the smaller squared error. Alternating between that assignment and
//! conditional-mean predictors (a Lloyd iteration) lowers the risk.
//!
//! The plane is discretized into square cells of width δ on [−L, L]²; the
//! outermost cells absorb the tails. Each cell carries its exact Gaussian
//! mass, conditional mean and conditional variance per axis, and the whole
//! cell is assigned to one side, so every Lloyd step is an exact descent on
//! the discretized problem.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::asymptotics::adaptive_simpson;
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(X > x) for a standard normal.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Mass of [a, b], accurate in both tails.
fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(b) - upper_tail(-a)
    }
}

/// E[min{X₁², X₂²}] for independent standard normals, from the tail formula
/// P(min > s²) = P(|X| > s)² = erfc(s/√2)², so the risk is
/// ∫₀^∞ 2s · erfc(s/√2)² ds.
pub fn naive_gauss2d_risk() -> f64 {
    adaptive_simpson(&|s: f64| 2.0 * s * erfc(s / SQRT_2).powi(2), 0.0, 12.0, 1e-13)
}

/// The discretized plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauss2dGrid {
    half_width: f64,
    cell: f64,
    /// Cell mass, conditional mean and conditional variance along one axis.
    mass: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl Gauss2dGrid {
    /// Cells of width `cell` covering [−half_width, half_width]. The half
    /// width must be at least 4 and a whole number of cells.
    pub fn new(half_width: f64, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && half_width >= 4.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument("need cell width > 0 and half width ≥ 4".into()));
        }
        let count = (2.0 * half_width / cell).round();
        if (count * cell - 2.0 * half_width).abs() > 1e-9 * half_width || count < 2.0 {
            return Err(Error::InvalidArgument("half width must be a whole number of cells".into()));
        }
        let count = count as usize;
        // Moments of the upper half, mirrored so that the grid is exactly
        // symmetric about zero.
        let (mut mass, mut mean, mut var) = (vec![0.0; count], vec![0.0; count], vec![0.0; count]);
        for i in count / 2..count {
            let a = -half_width + i as f64 * cell;
            let b = if i + 1 == count { f64::INFINITY } else { a + cell };
            let (a, b) = if i == count / 2 && count % 2 == 1 { (-0.5 * cell, 0.5 * cell) } else { (a, b) };
            let w = interval_mass(a, b);
            let (da, db) = (density(a), density(b));
            let m = if a == -b { 0.0 } else { (da - db) / w };
            let b_db = if b.is_finite() { b * db } else { 0.0 };
            let second = 1.0 + (a * da - b_db) / w;
            let mirror = count - 1 - i;
            mass[i] = w;
            mass[mirror] = w;
            mean[i] = m;
            mean[mirror] = -m;
            var[i] = (second - m * m).max(0.0);
            var[mirror] = var[i];
        }
        Ok(Self {
            half_width,
            cell,
            mass,
            mean,
            var,
        })
    }

    /// The reference grid: L = 5, δ = 0.02.
    pub fn reference() -> Self {
        Self::new(5.0, 0.02).expect("valid reference grid")
    }

    pub fn cells(&self) -> usize {
        self.mass.len()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cell_width(&self) -> f64 {
        self.cell
    }

    /// Midpoint of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.cell
    }

    /// Cell containing `x`; values beyond ±L land in the boundary cells.
    pub fn locate(&self, x: f64) -> usize {
        let pos = ((x + self.half_width) / self.cell).floor();
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(self.cells() - 1)
        }
    }

    /// Expected loss in cell (i, j) when feature `revealed` is shown.
    fn cell_loss(&self, pair: &PredictorPair, i: usize, j: usize, revealed: usize) -> f64 {
        if revealed == 0 {
            self.var[j] + (self.mean[j] - pair.given_first[i]).powi(2)
        } else {
            self.var[i] + (self.mean[i] - pair.given_second[j]).powi(2)
        }
    }

    /// Fraction of cell (i, j) assigned to revealing the first feature.
    /// The first feature wins strict comparisons; exact ties are split
    /// evenly so that mirrored predictors give mirrored partitions.
    fn share_first(&self, pair: &PredictorPair, i: usize, j: usize) -> f64 {
        let (l0, l1) = (self.cell_loss(pair, i, j, 0), self.cell_loss(pair, i, j, 1));
        if l0 < l1 {
            1.0
        } else if l0 > l1 {
            0.0
        } else {
            0.5
        }
    }

    /// Risk of the induced best-response policy.
    pub fn objective(&self, pair: &PredictorPair) -> Result<f64> {
        self.check(pair)?;
        let n = self.cells();
        let mut total = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let l0 = self.cell_loss(pair, i, j, 0);
                let l1 = self.cell_loss(pair, i, j, 1);
                row += self.mass[j] * l0.min(l1);
            }
            total += self.mass[i] * row;
        }
        Ok(total)
    }

    /// Risk when feature `revealed` is always shown.
    pub fn single_reveal_risk(&self, pair: &PredictorPair, revealed: usize) -> Result<f64> {
        self.check(pair)?;
        if revealed > 1 {
            return Err(Error::InvalidArgument("only features 0 and 1 exist".into()));
        }
        let n = self.cells();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += self.mass[i] * self.mass[j] * self.cell_loss(pair, i, j, revealed);
            }
        }
        Ok(total)
    }

    /// Best-response predictors for the current partition: conditional
    /// means of the hidden feature per cell of the shown one. Cells that
    /// never show a feature keep their previous prediction.
    fn update(&self, pair: &PredictorPair) -> PredictorPair {
        let n = self.cells();
        let mut next = pair.clone();
        for i in 0..n {
            let (mut w, mut s) = (0.0, 0.0);
            for j in 0..n {
                let share = self.share_first(pair, i, j) * self.mass[j];
                w += share;
                s += share * self.mean[j];
            }
            if w > 0.0 {
                next.given_first[i] = s / w;
            }
        }
        for j in 0..n {
            let (mut w, mut s) = (0.0, 0.0);
            for i in 0..n {
                let share = (1.0 - self.share_first(pair, i, j)) * self.mass[i];
                w += share;
                s += share * self.mean[i];
            }
            if w > 0.0 {
                next.given_second[j] = s / w;
            }
        }
        next
    }

    /// The induced partition at cell midpoints: (x₁, x₂, revealed feature),
    /// ties reported as feature 0.
    pub fn raster(&self, pair: &PredictorPair) -> Result<Vec<RasterCell>> {
        self.check(pair)?;
        let n = self.cells();
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let revealed = u8::from(self.cell_loss(pair, i, j, 0) > self.cell_loss(pair, i, j, 1));
                cells.push(RasterCell {
                    x1: self.center(i),
                    x2: self.center(j),
                    revealed,
                });
            }
        }
        Ok(cells)
    }

    fn check(&self, pair: &PredictorPair) -> Result<()> {
        if pair.given_first.len() != self.cells() || pair.given_second.len() != self.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.cells(),
                actual: pair.given_first.len().max(pair.given_second.len()),
            });
        }
        if pair.given_first.iter().chain(&pair.given_second).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("predictors must be finite".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant predictors on the grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorPair {
    /// Prediction of the second feature when the first is shown, per cell of
    /// the first.
    pub given_first: Vec<f64>,
    /// Prediction of the first feature when the second is shown.
    pub given_second: Vec<f64>,
}

impl PredictorPair {
    /// Both predictors sampled from functions at the cell midpoints.
    pub fn from_fns(grid: &Gauss2dGrid, first: impl Fn(f64) -> f64, second: impl Fn(f64) -> f64) -> Self {
        let centers: Vec<f64> = (0..grid.cells()).map(|i| grid.center(i)).collect();
        Self {
            given_first: centers.iter().map(|&x| first(x)).collect(),
            given_second: centers.iter().map(|&x| second(x)).collect(),
        }
    }

    /// Predict the prior mean: the naive receiver.
    pub fn zero(grid: &Gauss2dGrid) -> Self {
        Self::from_fns(grid, |_| 0.0, |_| 0.0)
    }

    /// The default starting point: x/2 for the second feature and −x/2 for
    /// the first. The zero pair is a fixed point of the iteration, so some
    /// asymmetry is needed to move away from the naive rule.
    pub fn tilted(grid: &Gauss2dGrid) -> Self {
        Self::from_fns(grid, |x| 0.5 * x, |x| -0.5 * x)
    }

    /// The same predictors with the roles of the features exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            given_first: self.given_second.clone(),
            given_second: self.given_first.clone(),
        }
    }

    /// Prediction of the hidden feature when `shown` ∈ {0, 1} is revealed
    /// with value `x`; constant beyond the grid.
    pub fn predict(&self, grid: &Gauss2dGrid, shown: usize, x: f64) -> f64 {
        let c = grid.locate(x);
        if shown == 0 {
            self.given_first[c]
        } else {
            self.given_second[c]
        }
    }
}

/// One cell of the partition raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterCell {
    pub x1: f64,
    pub x2: f64,
    /// 0 if the first feature is revealed, 1 for the second.
    pub revealed: u8,
}

/// Outcome of the Lloyd iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydResult {
    pub predictors: PredictorPair,
    pub risk: f64,
    /// Objective before the first step and after each step.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Alternates best-response assignment and conditional-mean updates until
/// the objective improves by less than `tolerance` or `max_iters` steps.
pub fn lloyd_optimize(
    grid: &Gauss2dGrid,
    init: PredictorPair,
    max_iters: usize,
    tolerance: f64,
) -> Result<LloydResult> {
    let mut pair = init;
    let mut risk = grid.objective(&pair)?;
    let mut history = vec![risk];
    let mut converged = false;
    for _ in 0..max_iters {
        let next = grid.update(&pair);
        let next_risk = grid.objective(&next)?;
        history.push(next_risk);
        let improvement = risk - next_risk;
        pair = next;
        risk = next_risk;
        if improvement < tolerance {
            converged = true;
            break;
        }
    }
    Ok(LloydResult {
        predictors: pair,
        risk,
        history,
        converged,
    })
}
