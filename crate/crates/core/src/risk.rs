//! Expected loss of a policy for naive and sophisticated receivers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{DiscreteBelief, EmpiricalSupport, GaussianBelief, HighlightSet, PriorSampler};
use crate::error::{Error, Result};
use crate::loss::{action_from_mean, bayes_action, realized_loss, Action, LossSpec};
use crate::naive::NaiveModel;
use crate::policies::{FnHighlighter, Highlighter, Planner};
use crate::select::for_each_subset;
use crate::{seeded_stream, TOLERANCE};

/// How the human updates on a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentType {
    /// Conditions on the revealed values only.
    Naive,
    /// Also conditions on which features were chosen.
    Sophisticated,
}

impl AgentType {
    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Sophisticated => "sophisticated",
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" | "n" => Ok(Self::Naive),
            "sophisticated" | "s" => Ok(Self::Sophisticated),
            other => Err(Error::InvalidArgument(format!("unknown agent type '{other}'"))),
        }
    }
}

/// How a risk was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    ExactDiscrete,
    MonteCarlo,
}

/// Expected loss of one policy for one receiver type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub policy: String,
    pub agent: AgentType,
    pub k: Option<usize>,
    pub expected_loss: f64,
    pub mode: EvalMode,
    /// Standard error of the mean (Monte-Carlo only).
    pub std_error: Option<f64>,
    pub seed: Option<u64>,
    /// Support points (exact) or draws (Monte-Carlo).
    pub n_samples: usize,
}

/// The two gaps between naive-targeted and sophisticated-targeted policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// R^N(σ^S): naive receiver facing the sophisticated-targeted policy.
    pub naive_risk_of_sophisticated_policy: f64,
    /// R^N(σ^N).
    pub naive_risk_of_naive_policy: f64,
    /// R^S(σ^N).
    pub sophisticated_risk_of_naive_policy: f64,
    /// R^S(σ^S).
    pub sophisticated_risk_of_sophisticated_policy: f64,
    /// Price of complexity R^N(σ^S) − R^N(σ^N).
    pub delta_naive: f64,
    /// Price of simplicity R^S(σ^N) − R^S(σ^S).
    pub delta_sophisticated: f64,
}

/// λ R^S + (1 − λ) R^N.
pub fn mixed_objective(naive_risk: f64, sophisticated_risk: f64, lambda: f64) -> f64 {
    lambda * sophisticated_risk + (1.0 - lambda) * naive_risk
}

/// Worst case over the two receiver types.
pub fn minimax_objective(naive_risk: f64, sophisticated_risk: f64) -> f64 {
    naive_risk.max(sophisticated_risk)
}

fn checked_selection<H: Highlighter + ?Sized>(policy: &H, x: &[f64]) -> Result<Vec<usize>> {
    let mut chosen = policy.select(x)?;
    chosen.sort_unstable();
    if chosen.windows(2).any(|w| w[0] == w[1]) || chosen.last().is_some_and(|&j| j >= x.len()) {
        return Err(Error::InvalidPolicy(format!("{} returned an invalid index set", policy.label())));
    }
    if let Some(k) = policy.bandwidth() {
        if chosen.len() > k {
            return Err(Error::InvalidPolicy(format!(
                "{} revealed {} features with bandwidth {k}",
                policy.label(),
                chosen.len()
            )));
        }
    }
    Ok(chosen)
}

/// Exact risk on a finite prior: the probability-weighted realized loss
/// over the support, with the posterior chosen by `agent`.
pub fn risk_exact_discrete<H: Highlighter + ?Sized>(
    prior: &DiscreteBelief,
    policy: &H,
    agent: AgentType,
    loss: &LossSpec,
) -> Result<RiskReport> {
    loss.validate(prior.dim())?;
    let selections: Vec<Vec<usize>> = prior
        .support()
        .par_iter()
        .map(|x| checked_selection(policy, x))
        .collect::<Result<_>>()?;
    let mut actions: HashMap<(Vec<usize>, Vec<u64>), Action> = HashMap::new();
    let mut total = 0.0;
    for (i, (x, p)) in prior.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let msg = HighlightSet::reveal(&selections[i], x)?;
        let key = msg.key();
        if !actions.contains_key(&key) {
            let posterior = match agent {
                AgentType::Naive => prior.condition(&msg)?,
                AgentType::Sophisticated => {
                    let keep: Vec<usize> = (0..prior.len())
                        .filter(|&j| selections[j] == msg.indices() && msg.matches(&prior.support()[j]))
                        .collect();
                    prior.restrict(&keep)?
                }
            };
            actions.insert(key.clone(), bayes_action(&posterior, loss)?);
        }
        total += p * realized_loss(&actions[&key], x, None, loss)?;
    }
    Ok(RiskReport {
        policy: policy.label(),
        agent,
        k: policy.bandwidth(),
        expected_loss: total.max(0.0),
        mode: EvalMode::ExactDiscrete,
        std_error: None,
        seed: None,
        n_samples: prior.len(),
    })
}

/// A receiver turning messages into actions.
pub trait Receiver: Sync {
    fn agent(&self) -> AgentType;

    fn respond(&self, msg: &HighlightSet, loss: &LossSpec) -> Result<Action>;
}

/// Naive updating under a prior model.
pub struct NaiveReceiver<'a, M: NaiveModel>(pub &'a M);

impl<M: NaiveModel> Receiver for NaiveReceiver<'_, M> {
    fn agent(&self) -> AgentType {
        AgentType::Naive
    }

    fn respond(&self, msg: &HighlightSet, loss: &LossSpec) -> Result<Action> {
        self.0.respond(msg, loss)
    }
}

/// Exact sophisticated updating on a finite prior; the policy's choice on
/// every support point is computed once up front.
pub struct DiscreteSophisticatedReceiver<'a> {
    prior: &'a DiscreteBelief,
    selections: Vec<Vec<usize>>,
}

impl<'a> DiscreteSophisticatedReceiver<'a> {
    pub fn new<H: Highlighter + ?Sized>(prior: &'a DiscreteBelief, policy: &H) -> Result<Self> {
        let selections = prior
            .support()
            .par_iter()
            .map(|x| checked_selection(policy, x))
            .collect::<Result<_>>()?;
        Ok(Self { prior, selections })
    }
}

impl Receiver for DiscreteSophisticatedReceiver<'_> {
    fn agent(&self) -> AgentType {
        AgentType::Sophisticated
    }

    fn respond(&self, msg: &HighlightSet, loss: &LossSpec) -> Result<Action> {
        let keep: Vec<usize> = (0..self.prior.len())
            .filter(|&j| self.selections[j] == msg.indices() && msg.matches(&self.prior.support()[j]))
            .collect();
        bayes_action(&self.prior.restrict(&keep)?, loss)
    }
}

/// Sophisticated updating approximated by simulated support draws, falling
/// back to the naive Gaussian posterior mean on unseen messages.
pub struct EmpiricalReceiver<'a> {
    pub support: &'a EmpiricalSupport,
    pub fallback: &'a GaussianBelief,
}

impl Receiver for EmpiricalReceiver<'_> {
    fn agent(&self) -> AgentType {
        AgentType::Sophisticated
    }

    fn respond(&self, msg: &HighlightSet, loss: &LossSpec) -> Result<Action> {
        let estimate = self
            .support
            .estimate(msg, |m| self.fallback.conditional_mean(m))?;
        let mut mean = estimate.mean;
        // The human sees the revealed values; keep them exact.
        for (j, v) in msg.iter() {
            mean[j] = v;
        }
        action_from_mean(mean, loss)
    }
}

/// Mean and standard error (sample standard deviation over √n).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Realized loss of the receiver's response at each row.
pub fn realized_losses<H, A>(rows: &[Vec<f64>], policy: &H, receiver: &A, loss: &LossSpec) -> Result<Vec<f64>>
where
    H: Highlighter + ?Sized,
    A: Receiver + ?Sized,
{
    rows.par_iter()
        .map(|x| {
            let msg = HighlightSet::reveal(&checked_selection(policy, x)?, x)?;
            realized_loss(&receiver.respond(&msg, loss)?, x, None, loss)
        })
        .collect()
}

/// Monte-Carlo risk: draw `n_samples` instances (draw `i` from stream `i`
/// of `seed`), apply the policy and the receiver, and average.
pub fn risk_monte_carlo<S, H, A>(
    sampler: &S,
    policy: &H,
    receiver: &A,
    loss: &LossSpec,
    n_samples: usize,
    seed: u64,
) -> Result<RiskReport>
where
    S: PriorSampler,
    H: Highlighter + ?Sized,
    A: Receiver + ?Sized,
{
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    loss.validate(sampler.dim())?;
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_stream(seed, i as u64);
            let x = sampler.sample(&mut rng);
            let msg = HighlightSet::reveal(&checked_selection(policy, &x)?, &x)?;
            realized_loss(&receiver.respond(&msg, loss)?, &x, None, loss)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_std_error(&values);
    Ok(RiskReport {
        policy: policy.label(),
        agent: receiver.agent(),
        k: policy.bandwidth(),
        expected_loss: mean,
        mode: EvalMode::MonteCarlo,
        std_error: Some(se),
        seed: Some(seed),
        n_samples,
    })
}

fn clamp_gap(gap: f64) -> f64 {
    if gap < 0.0 && gap > -TOLERANCE {
        0.0
    } else {
        gap
    }
}

/// Δ^N = R^N(σ^S) − R^N(σ^N) and Δ^S = R^S(σ^N) − R^S(σ^S), exactly.
/// Negatives above −1e-9 are clamped to zero; larger negatives are kept so
/// that mislabelled policies stay visible.
pub fn gap_metrics<HS, HN>(
    prior: &DiscreteBelief,
    policy_for_sophisticated: &HS,
    policy_for_naive: &HN,
    loss: &LossSpec,
) -> Result<GapReport>
where
    HS: Highlighter + ?Sized,
    HN: Highlighter + ?Sized,
{
    let rn_s = risk_exact_discrete(prior, policy_for_sophisticated, AgentType::Naive, loss)?.expected_loss;
    let rn_n = risk_exact_discrete(prior, policy_for_naive, AgentType::Naive, loss)?.expected_loss;
    let rs_n = risk_exact_discrete(prior, policy_for_naive, AgentType::Sophisticated, loss)?.expected_loss;
    let rs_s =
        risk_exact_discrete(prior, policy_for_sophisticated, AgentType::Sophisticated, loss)?.expected_loss;
    Ok(GapReport {
        naive_risk_of_sophisticated_policy: rn_s,
        naive_risk_of_naive_policy: rn_n,
        sophisticated_risk_of_naive_policy: rs_n,
        sophisticated_risk_of_sophisticated_policy: rs_s,
        delta_naive: clamp_gap(rn_s - rn_n),
        delta_sophisticated: clamp_gap(rs_n - rs_s),
    })
}

/// Sophisticated risk of reconstructing the machine coordinates when the
/// human additionally observes the `private` coordinates, next to the risk
/// without them. The policy sees only the machine coordinates (in their
/// original order) and `loss` applies to them.
pub fn risk_sophisticated_with_private_info<H: Highlighter + ?Sized>(
    prior: &DiscreteBelief,
    private: &[usize],
    policy: &H,
    loss: &LossSpec,
) -> Result<(RiskReport, RiskReport)> {
    let d = prior.dim();
    let mut is_private = vec![false; d];
    for &j in private {
        if j >= d {
            return Err(Error::InvalidArgument(format!("private coordinate {j} out of range")));
        }
        is_private[j] = true;
    }
    let machine: Vec<usize> = (0..d).filter(|&j| !is_private[j]).collect();
    if machine.is_empty() {
        return Err(Error::InvalidArgument("no machine coordinates left".into()));
    }
    let private: Vec<usize> = (0..d).filter(|&j| is_private[j]).collect();
    loss.validate(machine.len())?;
    let project = |x: &[f64], coords: &[usize]| coords.iter().map(|&j| x[j]).collect::<Vec<f64>>();
    let machine_rows: Vec<Vec<f64>> = prior.support().iter().map(|x| project(x, &machine)).collect();
    let selections: Vec<Vec<usize>> = machine_rows
        .iter()
        .map(|x| checked_selection(policy, x))
        .collect::<Result<_>>()?;

    let risk = |with_private: bool| -> Result<f64> {
        let mut total = 0.0;
        let mut actions: HashMap<(Vec<usize>, Vec<u64>, Vec<u64>), Action> = HashMap::new();
        for (i, (x, p)) in prior.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let msg = HighlightSet::reveal(&selections[i], &machine_rows[i])?;
            let seen: Vec<f64> = if with_private { project(x, &private) } else { Vec::new() };
            let (idx, vals) = msg.key();
            let key = (idx, vals, seen.iter().map(|v| v.to_bits()).collect());
            if !actions.contains_key(&key) {
                let keep: Vec<usize> = (0..prior.len())
                    .filter(|&j| {
                        selections[j] == msg.indices()
                            && msg.matches(&machine_rows[j])
                            && (!with_private
                                || private
                                    .iter()
                                    .zip(&seen)
                                    .all(|(&c, &v)| crate::belief::values_match(prior.support()[j][c], v)))
                    })
                    .collect();
                let posterior = prior.restrict(&keep)?.marginal(&machine)?;
                actions.insert(key.clone(), bayes_action(&posterior, loss)?);
            }
            total += p * realized_loss(&actions[&key], &machine_rows[i], None, loss)?;
        }
        Ok(total)
    };
    let report = |value: f64| RiskReport {
        policy: policy.label(),
        agent: AgentType::Sophisticated,
        k: policy.bandwidth(),
        expected_loss: value,
        mode: EvalMode::ExactDiscrete,
        std_error: None,
        seed: None,
        n_samples: prior.len(),
    };
    let with = risk(true)?;
    let without = risk(false)?;
    debug_assert!(with <= without + TOLERANCE, "private information raised the risk: {with} > {without}");
    Ok((report(with), report(without)))
}

/// Largest shift |E[X_i | X_S = x_S] − E[X_i]| over coordinates `i`, sets
/// `S` of at most `k` other coordinates and attainable values `x_S`, by
/// exhaustive scan.
pub fn weak_mean_shift_epsilon(prior: &DiscreteBelief, k: usize) -> Result<f64> {
    let d = prior.dim();
    let means = prior.mean();
    let coords: Vec<usize> = (0..d).collect();
    let mut eps = 0.0f64;
    let mut failure: Option<Error> = None;
    for_each_subset(&coords, k, |set| {
        if set.is_empty() || failure.is_some() {
            return;
        }
        let mut seen: Vec<Vec<u64>> = Vec::new();
        for x in prior.support() {
            let msg = match HighlightSet::reveal(set, x) {
                Ok(m) => m,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let bits = msg.key().1;
            if seen.contains(&bits) {
                continue;
            }
            seen.push(bits);
            match prior.condition(&msg) {
                Ok(post) => {
                    let m = post.mean();
                    for i in (0..d).filter(|i| !set.contains(i)) {
                        eps = eps.max((m[i] - means[i]).abs());
                    }
                }
                Err(Error::EmptyConditioningSet) => {}
                Err(e) => failure = Some(e),
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(eps),
    }
}

/// Largest coordinate range max_i (max x_i − min x_i) over the support.
pub fn support_range(prior: &DiscreteBelief) -> f64 {
    (0..prior.dim())
        .map(|j| {
            let (lo, hi) = prior
                .support()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Additive slack 2(d − k)(2Rε + ε²) of the deviation heuristic over the
/// naive-optimal contextual policy under a weak mean shift ε.
pub fn deviation_slack(d: usize, k: usize, range: f64, eps: f64) -> f64 {
    2.0 * d.saturating_sub(k) as f64 * (2.0 * range * eps + eps * eps)
}

/// Naive risk of the contextual deviation heuristic and of the naive-optimal
/// contextual policy (exact search, empty set allowed) on a finite prior
/// under squared recovery, with the slack bound relating them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationBoundCheck {
    pub deviation_risk: f64,
    pub optimal_risk: f64,
    pub epsilon: f64,
    pub range: f64,
    pub slack: f64,
}

impl DeviationBoundCheck {
    pub fn holds(&self) -> bool {
        self.deviation_risk <= self.optimal_risk + self.slack + TOLERANCE
    }
}

pub fn deviation_bound_check(prior: &DiscreteBelief, k: usize) -> Result<DeviationBoundCheck> {
    let loss = LossSpec::SquaredRecovery;
    let planner = Planner::new(prior, &loss);
    let deviation = FnHighlighter::new("contextual_deviation", k, |x: &[f64]| {
        Ok(planner.contextual_deviation(x, k)?.indices().to_vec())
    });
    let exact = FnHighlighter::new("contextual_exact", k, |x: &[f64]| {
        Ok(planner.contextual_exact(x, k)?.indices().to_vec())
    });
    let deviation_risk = risk_exact_discrete(prior, &deviation, AgentType::Naive, &loss)?.expected_loss;
    let optimal_risk = risk_exact_discrete(prior, &exact, AgentType::Naive, &loss)?.expected_loss;
    let epsilon = weak_mean_shift_epsilon(prior, k)?;
    let range = support_range(prior);
    Ok(DeviationBoundCheck {
        deviation_risk,
        optimal_risk,
        epsilon,
        range,
        slack: deviation_slack(prior.dim(), k, range, epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::FixedSet;

    fn parity(b: f64) -> DiscreteBelief {
        DiscreteBelief::uniform(vec![vec![0.0, 0.0], vec![0.0, b], vec![1.0, 0.0], vec![1.0, b]]).unwrap()
    }

    #[test]
    fn parity_example_risks() {
        let prior = parity(3.0);
        let loss = LossSpec::SquaredRecovery;
        let soph = FnHighlighter::new("parity", 1, |x: &[f64]| {
            Ok(if (x[0] + x[1]) as i64 % 2 == 1 { vec![0] } else { vec![1] })
        });
        let naive = FixedSet::new(vec![1]);
        let gaps = gap_metrics(&prior, &soph, &naive, &loss).unwrap();
        assert!((gaps.naive_risk_of_sophisticated_policy - 1.25).abs() < 1e-12);
        assert!(gaps.sophisticated_risk_of_sophisticated_policy.abs() < 1e-12);
        assert!((gaps.naive_risk_of_naive_policy - 0.25).abs() < 1e-12);
        assert!((gaps.delta_naive - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_monte_carlo_is_zero() {
        let prior = DiscreteBelief::point_mass(vec![0.3, 0.7]).unwrap();
        let loss = LossSpec::SquaredRecovery;
        let policy = FixedSet::new(vec![]);
        let report =
            risk_monte_carlo(&prior, &policy, &NaiveReceiver(&prior), &loss, 100, 1).unwrap();
        assert_eq!(report.expected_loss, 0.0);
        assert_eq!(report.std_error, Some(0.0));
        assert_eq!(report.mode, EvalMode::MonteCarlo);
    }

    #[test]
    fn bandwidth_violations_are_reported() {
        let prior = parity(3.0);
        let greedy = FnHighlighter::new("too-many", 1, |_: &[f64]| Ok(vec![0, 1]));
        assert!(matches!(
            risk_exact_discrete(&prior, &greedy, AgentType::Naive, &LossSpec::SquaredRecovery),
            Err(Error::InvalidPolicy(_))
        ));
    }

    #[test]
    fn objectives() {
        assert_eq!(mixed_objective(1.0, 0.0, 0.25), 0.75);
        assert_eq!(minimax_objective(1.0, 2.0), 2.0);
        assert_eq!("Sophisticated".parse::<AgentType>().unwrap(), AgentType::Sophisticated);
    }

    #[test]
    fn independent_features_have_no_mean_shift() {
        let prior = DiscreteBelief::from_bernoulli(&crate::BernoulliBelief::new(vec![0.2, 0.5, 0.9]).unwrap())
            .unwrap();
        assert!(weak_mean_shift_epsilon(&prior, 2).unwrap() < 1e-12);
        assert_eq!(deviation_slack(3, 1, 1.0, 0.0), 0.0);
    }
}
