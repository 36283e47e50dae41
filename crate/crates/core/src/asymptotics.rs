//! Limit risks for many independent binary features.
//!
//! Features are folded so that 1 is always the rarer value: p* = min(p, 1−p)
//! and X* flips X whenever p > 1/2. Sorting the folded probabilities in
//! increasing order, a bandwidth fraction α of the features can be revealed.
//! As d grows, the normalized risks of the three reference procedures
//! converge to integrals of the quantile function Q* of the folded
//! distribution of probabilities:
//!
//! - fixed: reveal the αd features with the largest p*;
//!   both receivers get ∫₀^{1−α} Q*(1−Q*);
//! - fraction β: among the first ⌊βd⌋ sorted features reveal those with
//!   X* = 1; sophisticated ∫_β¹ Q*(1−Q*), naive adds ∫₀^β Q*²(1−Q*);
//! - greedy: reveal the first k sorted features with X* = 1; equivalent to
//!   the fraction procedure at β*, the root of ∫₀^β Q* = α.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{mean_and_std_error, AgentType};
use crate::seeded_stream;
use rand::RngExt;

const SIMPSON_TOLERANCE: f64 = 1e-10;
const SIMPSON_MAX_DEPTH: u32 = 48;
const BISECTION_WIDTH: f64 = 1e-12;

/// Limiting distribution F of the success probabilities across features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LimitCdf {
    /// Empirical distribution of a finite probability list.
    Step(Vec<f64>),
    /// Density linear between knots `(t, density)`; knots span [0, 1] and
    /// the density is normalized on construction.
    PiecewiseLinearDensity(Vec<(f64, f64)>),
}

impl LimitCdf {
    /// Density 4p on [0, 1/2] and 4 − 4p on [1/2, 1]; folds to F*(t) = 4t².
    pub fn triangular() -> Self {
        Self::PiecewiseLinearDensity(vec![(0.0, 0.0), (0.5, 2.0), (1.0, 0.0)])
    }

    /// A single probability shared by every feature.
    pub fn point_mass(p: f64) -> Self {
        Self::Step(vec![p])
    }

    fn validated(self) -> Result<Self> {
        match self {
            Self::Step(mut ps) => {
                if ps.is_empty() || ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::InvalidArgument(
                        "probabilities must be a nonempty list in [0, 1]".into(),
                    ));
                }
                ps.sort_by(f64::total_cmp);
                Ok(Self::Step(ps))
            }
            Self::PiecewiseLinearDensity(knots) => {
                let ok = knots.len() >= 2
                    && knots[0].0 == 0.0
                    && knots[knots.len() - 1].0 == 1.0
                    && knots.windows(2).all(|w| w[0].0 < w[1].0)
                    && knots.iter().all(|&(_, f)| f.is_finite() && f >= 0.0);
                if !ok {
                    return Err(Error::InvalidArgument(
                        "density knots must increase from 0 to 1 with nonnegative values".into(),
                    ));
                }
                let mass: f64 = knots
                    .windows(2)
                    .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                    .sum();
                if mass <= 0.0 {
                    return Err(Error::InvalidArgument("density has zero mass".into()));
                }
                Ok(Self::PiecewiseLinearDensity(
                    knots.into_iter().map(|(t, f)| (t, f / mass)).collect(),
                ))
            }
        }
    }

    /// F(t), right-continuous.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Step(ps) => ps.partition_point(|&p| p <= t) as f64 / ps.len() as f64,
            Self::PiecewiseLinearDensity(knots) => piecewise_cdf(knots, t),
        }
    }

    /// F(t⁻).
    fn cdf_left(&self, t: f64) -> f64 {
        match self {
            Self::Step(ps) => ps.partition_point(|&p| p < t) as f64 / ps.len() as f64,
            Self::PiecewiseLinearDensity(knots) => piecewise_cdf(knots, t),
        }
    }

    /// Generalized inverse inf{t : F(t) ≥ q}.
    pub fn inverse(&self, q: f64) -> f64 {
        match self {
            Self::Step(ps) => step_quantile(ps, q),
            Self::PiecewiseLinearDensity(_) => bisect_inverse(|t| self.cdf(t), q, 1.0),
        }
    }

    /// The d probabilities F⁻¹((i − 1/2)/d), i = 1..d, used for finite-d runs.
    pub fn probabilities(&self, d: usize) -> Vec<f64> {
        (0..d)
            .map(|i| self.inverse((i as f64 + 0.5) / d as f64))
            .collect()
    }
}

fn piecewise_cdf(knots: &[(f64, f64)], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if t >= b {
            acc += 0.5 * (fa + fb) * (b - a);
        } else {
            let s = t - a;
            acc += fa * s + 0.5 * (fb - fa) * s * s / (b - a);
            return acc.min(1.0);
        }
    }
    1.0
}

/// inf{t ∈ [0, hi] : F(t) ≥ q} for a continuous nondecreasing F.
fn bisect_inverse(f: impl Fn(f64) -> f64, q: f64, hi: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// sorted[⌈qn⌉ − 1] for q ∈ (0, 1]; 0 for q ≤ 0.
fn step_quantile(sorted: &[f64], q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let n = sorted.len();
    let pos = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[pos - 1]
}

/// A limiting distribution together with a bandwidth fraction α ∈ (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitModel {
    cdf: LimitCdf,
    alpha: f64,
    /// Sorted folded probabilities (step models only).
    #[serde(skip)]
    folded: Vec<f64>,
}

impl LimitModel {
    pub fn new(cdf: LimitCdf, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth fraction must lie in (0, 1), got {alpha}"
            )));
        }
        let cdf = cdf.validated()?;
        let folded = match &cdf {
            LimitCdf::Step(ps) => {
                let mut f: Vec<f64> = ps.iter().map(|&p| p.min(1.0 - p)).collect();
                f.sort_by(f64::total_cmp);
                f
            }
            LimitCdf::PiecewiseLinearDensity(_) => Vec::new(),
        };
        Ok(Self { cdf, alpha, folded })
    }

    /// The same distribution with another bandwidth fraction.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.cdf.clone(), alpha)
    }

    pub fn cdf(&self) -> &LimitCdf {
        &self.cdf
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// F*(t) = F(t) + 1 − F((1 − t)⁻) for t < 1/2, and 1 from 1/2 on: the
    /// distribution of min(p, 1 − p).
    pub fn folded_cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else if t >= 0.5 {
            1.0
        } else {
            (self.cdf.cdf(t) + 1.0 - self.cdf.cdf_left(1.0 - t)).clamp(0.0, 1.0)
        }
    }

    /// Q*(q) = inf{t ∈ [0, 1] : F*(t) ≥ q}.
    pub fn quantile(&self, q: f64) -> f64 {
        match self.cdf {
            LimitCdf::Step(_) => step_quantile(&self.folded, q),
            LimitCdf::PiecewiseLinearDensity(_) => {
                bisect_inverse(|t| self.folded_cdf(t), q, 0.5)
            }
        }
    }

    /// ∫_a^b g(Q*(q)) dq: exact for step models, adaptive Simpson otherwise.
    pub fn integrate_quantile(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        match self.cdf {
            LimitCdf::Step(_) => {
                let n = self.folded.len() as f64;
                self.folded
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let lo = (i as f64 / n).max(a);
                        let hi = ((i + 1) as f64 / n).min(b);
                        if hi > lo {
                            (hi - lo) * g(p)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            }
            LimitCdf::PiecewiseLinearDensity(_) => {
                adaptive_simpson(&|q| g(self.quantile(q)), a, b, SIMPSON_TOLERANCE)
            }
        }
    }

    /// ∫₀¹ Q*: the admissible upper bound on α for greedy highlighting.
    pub fn bandwidth_bound(&self) -> f64 {
        self.integrate_quantile(0.0, 1.0, |p| p)
    }

    /// Root of ∫₀^β Q* = α, by bisection to 1e-12.
    pub fn beta_star(&self) -> Result<f64> {
        let bound = self.bandwidth_bound();
        if self.alpha >= bound {
            return Err(Error::BandwidthTooLarge {
                alpha: self.alpha,
                bound,
            });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            if self.integrate_quantile(0.0, mid, |p| p) >= self.alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Normalized risk of optimal fixed highlighting, for either receiver.
    pub fn fixed_limit_risk(&self) -> f64 {
        self.integrate_quantile(0.0, 1.0 - self.alpha, |p| p * (1.0 - p))
    }

    /// (sophisticated, naive) normalized risks of fraction-β highlighting.
    pub fn fraction_limit_risks(&self, beta: f64) -> (f64, f64) {
        let tail = self.integrate_quantile(beta, 1.0, |p| p * (1.0 - p));
        let head = self.integrate_quantile(0.0, beta, |p| p * p * (1.0 - p));
        (tail, head + tail)
    }

    /// (sophisticated, naive) normalized risks of greedy highlighting.
    pub fn greedy_limit_risks(&self) -> Result<(f64, f64)> {
        Ok(self.fraction_limit_risks(self.beta_star()?))
    }

    /// Limit risk of `procedure` for `agent`.
    pub fn limit_risk(&self, procedure: Procedure, agent: AgentType) -> Result<f64> {
        let (soph, naive) = match procedure {
            Procedure::Fixed => {
                let r = self.fixed_limit_risk();
                (r, r)
            }
            Procedure::Fraction(beta) => self.fraction_limit_risks(beta),
            Procedure::Greedy => self.greedy_limit_risks()?,
        };
        Ok(match agent {
            AgentType::Sophisticated => soph,
            AgentType::Naive => naive,
        })
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// The three reference procedures on sorted folded features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    /// Reveal the k features with the largest folded probability.
    Fixed,
    /// Reveal the rare-valued features among the first ⌊βd⌋ sorted ones.
    Fraction(f64),
    /// Reveal the first k sorted features with the rare value, padding with
    /// the last common-valued ones when fewer exist.
    Greedy,
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Fraction(_) => "fraction",
            Self::Greedy => "greedy",
        }
    }
}

/// Outcome of a finite-d simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub d: usize,
    pub k: usize,
    pub n_trials: usize,
    /// Mean over trials of the loss divided by d.
    pub mean: f64,
    pub std_error: f64,
    /// Average number of features revealed (can exceed k for fractions).
    pub mean_revealed: f64,
}

/// Monte-Carlo normalized loss of a procedure with independent features
/// with success probabilities `probs`.
///
/// Both receivers predict p* for features they know nothing about. The
/// sophisticated receiver decodes the procedure from the sorted order: under
/// the fraction rule every hidden feature in the scanned prefix is common;
/// under greedy every hidden feature before the last revealed rare one is
/// common, and everything is known once fewer than k rare values exist.
pub fn finite_d_simulation(
    probs: &[f64],
    k: usize,
    procedure: Procedure,
    agent: AgentType,
    n_trials: usize,
    seed: u64,
) -> Result<SimulationResult> {
    let d = probs.len();
    if d == 0 || n_trials == 0 {
        return Err(Error::InvalidArgument("need features and trials".into()));
    }
    if k > d {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds d = {d}")));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
    }
    if let Procedure::Fraction(beta) = procedure {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("fraction {beta} outside [0, 1]")));
        }
    }
    let mut folded: Vec<f64> = probs.iter().map(|&p| p.min(1.0 - p)).collect();
    folded.sort_by(f64::total_cmp);

    let trials: Vec<(f64, usize)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_stream(seed, t as u64);
            let rare: Vec<bool> = folded.iter().map(|&p| rng.random::<f64>() < p).collect();
            simulate_trial(&folded, &rare, k, procedure, agent)
        })
        .collect();
    let losses: Vec<f64> = trials.iter().map(|&(l, _)| l / d as f64).collect();
    let (mean, std_error) = mean_and_std_error(&losses);
    let mean_revealed = trials.iter().map(|&(_, r)| r as f64).sum::<f64>() / n_trials as f64;
    Ok(SimulationResult {
        d,
        k,
        n_trials,
        mean,
        std_error,
        mean_revealed,
    })
}

/// Loss and revealed count of one draw; `rare[j]` is X* at sorted position j.
fn simulate_trial(folded: &[f64], rare: &[bool], k: usize, procedure: Procedure, agent: AgentType) -> (f64, usize) {
    let d = folded.len();
    let err = |j: usize| {
        let x = if rare[j] { 1.0 } else { 0.0 };
        (x - folded[j]).powi(2)
    };
    match procedure {
        Procedure::Fixed => ((0..d - k).map(err).sum(), k),
        Procedure::Fraction(beta) => {
            let cut = ((beta * d as f64).floor() as usize).min(d);
            let tail: f64 = (cut..d).map(err).sum();
            let revealed = rare[..cut].iter().filter(|&&r| r).count();
            let head = match agent {
                AgentType::Sophisticated => 0.0,
                AgentType::Naive => (0..cut).filter(|&j| !rare[j]).map(err).sum(),
            };
            (head + tail, revealed)
        }
        Procedure::Greedy => {
            let mut shown = vec![false; d];
            let mut count = 0;
            let mut last_rare = None;
            for j in 0..d {
                if count == k {
                    break;
                }
                if rare[j] {
                    shown[j] = true;
                    count += 1;
                    last_rare = Some(j);
                }
            }
            let exhausted = count < k;
            let mut pad = k - count;
            for j in (0..d).rev() {
                if pad == 0 {
                    break;
                }
                if !shown[j] {
                    shown[j] = true;
                    pad -= 1;
                }
            }
            let known_prefix = match (agent, exhausted) {
                (AgentType::Naive, _) => 0,
                (AgentType::Sophisticated, true) => d,
                (AgentType::Sophisticated, false) => last_rare.map_or(0, |j| j + 1),
            };
            // Hidden features inside the decoded prefix are known to be common.
            let loss = (known_prefix..d).filter(|&j| !shown[j]).map(err).sum();
            (loss, k)
        }
    }
}

/// One line of the limit-versus-simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub model: String,
    pub procedure: String,
    /// α for fixed and greedy, β for fraction.
    pub parameter: f64,
    pub agent: AgentType,
    pub d: usize,
    pub k: usize,
    pub formula: f64,
    pub simulated: f64,
    pub std_error: f64,
    pub mean_revealed: f64,
}

/// Compares every procedure and receiver against its limit at dimension `d`
/// with k = round(αd). The fraction procedure runs at β*.
pub fn asymptotic_report(
    model_id: &str,
    model: &LimitModel,
    d: usize,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<AsymptoticRow>> {
    let probs = model.cdf().probabilities(d);
    let k = ((model.alpha() * d as f64).round() as usize).min(d);
    let beta = model.beta_star()?;
    let mut rows = Vec::new();
    for (stream, procedure) in [Procedure::Fixed, Procedure::Fraction(beta), Procedure::Greedy]
        .into_iter()
        .enumerate()
    {
        for agent in [AgentType::Naive, AgentType::Sophisticated] {
            let sim = finite_d_simulation(&probs, k, procedure, agent, n_trials, seed.wrapping_add(stream as u64))?;
            rows.push(AsymptoticRow {
                model: model_id.to_string(),
                procedure: procedure.name().to_string(),
                parameter: match procedure {
                    Procedure::Fraction(b) => b,
                    _ => model.alpha(),
                },
                agent,
                d,
                k,
                formula: model.limit_risk(procedure, agent)?,
                simulated: sim.mean,
                std_error: sim.std_error,
                mean_revealed: sim.mean_revealed,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid() -> LimitModel {
        LimitModel::new(LimitCdf::point_mass(0.3), 0.15).unwrap()
    }

    #[test]
    fn folding_point_masses() {
        let low = LimitModel::new(LimitCdf::point_mass(0.3), 0.1).unwrap();
        let high = LimitModel::new(LimitCdf::point_mass(0.7), 0.1).unwrap();
        for t in [0.0, 0.1, 0.29, 0.3, 0.31, 0.45, 0.5, 0.8] {
            assert_eq!(low.folded_cdf(t), high.folded_cdf(t), "t = {t}");
            assert_eq!(low.folded_cdf(t), if t >= 0.3 { 1.0 } else { 0.0 });
        }
        assert!((high.quantile(0.5) - 0.3).abs() < 1e-15);
        assert!((high.quantile(1.0) - 0.3).abs() < 1e-15);
        assert_eq!(high.quantile(0.0), 0.0);
    }

    #[test]
    fn step_quantile_by_hand() {
        let m = LimitModel::new(LimitCdf::Step(vec![0.1, 0.2, 0.5]), 0.1).unwrap();
        assert_eq!(m.quantile(0.5), 0.2);
        assert_eq!(m.quantile(1.0 / 3.0), 0.1);
        assert_eq!(m.quantile(0.34), 0.2);
    }

    #[test]
    fn triangular_folds_to_quadratic() {
        let m = LimitModel::new(LimitCdf::triangular(), 0.25).unwrap();
        for t in [0.05, 0.2, 0.33, 0.49] {
            assert!((m.folded_cdf(t) - 4.0 * t * t).abs() < 1e-12);
        }
        for q in [0.01, 0.3, 0.9] {
            assert!((m.quantile(q) - q.sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_closed_forms() {
        let m = iid();
        assert!((m.fixed_limit_risk() - 0.1785).abs() < 1e-12);
        assert!((m.beta_star().unwrap() - 0.5).abs() < 1e-11);
        let (soph, naive) = m.greedy_limit_risks().unwrap();
        assert!((soph - 0.105).abs() < 1e-11);
        assert!((naive - 0.1365).abs() < 1e-11);
    }

    #[test]
    fn bandwidth_bound_is_enforced() {
        let m = iid().with_alpha(0.3).unwrap();
        assert!(matches!(m.beta_star(), Err(Error::BandwidthTooLarge { .. })));
        assert!(LimitModel::new(LimitCdf::point_mass(0.3), 1.0).is_err());
    }

    #[test]
    fn simpson_on_a_smooth_integrand() {
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_bandwidth_leaves_prior_variance() {
        let probs = [0.1, 0.4, 0.7, 0.5];
        let exact: f64 = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() / 4.0;
        for procedure in [Procedure::Fixed, Procedure::Greedy] {
            let r = finite_d_simulation(&probs, 0, procedure, AgentType::Naive, 40_000, 5).unwrap();
            assert!((r.mean - exact).abs() < 4.0 * r.std_error, "{r:?}");
        }
    }

    #[test]
    fn greedy_decoding_when_rare_values_run_out() {
        let folded = [0.1, 0.2, 0.3];
        let rare = [false, true, false];
        let (soph, n) = simulate_trial(&folded, &rare, 2, Procedure::Greedy, AgentType::Sophisticated);
        assert_eq!((soph, n), (0.0, 2));
        // Naive: positions 1 (rare) and 2 (padding) shown, position 0 costs 0.1².
        let (naive, _) = simulate_trial(&folded, &rare, 2, Procedure::Greedy, AgentType::Naive);
        assert!((naive - 0.01).abs() < 1e-15);
    }
}
