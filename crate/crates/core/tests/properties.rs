use highlight_core::belief::{naive_posterior_discrete, sophisticated_posterior_discrete};
use highlight_core::loss::{bayes_action, realized_loss};
use highlight_core::policies::{FnHighlighter, Planner};
use highlight_core::risk::{deviation_bound_check, risk_exact_discrete, risk_sophisticated_with_private_info};
use highlight_core::{
    Action, AgentType, BernoulliBelief, DiscreteBelief, GaussianBelief, HighlightSet, LossSpec, NaiveModel,
    OutcomeModel,
};
use highlight_core::naive::TrainingSample;
use proptest::prelude::*;

const SLACK: f64 = 1e-9;

/// Small table priors: 2–3 features with values in {0, 1, 2}, up to seven
/// distinct support points with integer weights.
fn discrete_prior(max_dim: usize) -> impl Strategy<Value = DiscreteBelief> {
    (2..=max_dim).prop_flat_map(|d| {
        prop::collection::vec((prop::collection::vec(0u8..3, d), 1u32..5), 2..8).prop_filter_map(
            "needs two distinct points",
            |rows| {
                let mut support: Vec<Vec<f64>> = Vec::new();
                let mut weights = Vec::new();
                for (x, w) in rows {
                    let x: Vec<f64> = x.into_iter().map(f64::from).collect();
                    if !support.contains(&x) {
                        support.push(x);
                        weights.push(f64::from(w));
                    }
                }
                (support.len() >= 2).then(|| DiscreteBelief::from_weights(support, weights).unwrap())
            },
        )
    })
}

type Choice<'a> = Box<dyn Fn(&Planner<'_, DiscreteBelief>, &[f64]) -> Vec<usize> + Sync + 'a>;

fn heuristics(k: usize) -> Vec<(&'static str, Choice<'static>)> {
    vec![
        ("deviation", Box::new(move |p, x| p.contextual_deviation(x, k).unwrap().indices().to_vec())),
        ("marginal", Box::new(move |p, x| p.contextual_marginal(x, k).unwrap().indices().to_vec())),
        ("greedy", Box::new(move |p, x| p.contextual_greedy(x, k, true).unwrap().indices().to_vec())),
        ("greedy_full", Box::new(move |p, x| p.contextual_greedy(x, k, false).unwrap().indices().to_vec())),
        ("exact", Box::new(move |p, x| p.contextual_exact(x, k).unwrap().indices().to_vec())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posteriors_are_distributions_and_nested(prior in discrete_prior(3), k in 1usize..3, pick in 0usize..8) {
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let policy = FnHighlighter::new("deviation", k, |x: &[f64]| {
            Ok(planner.contextual_deviation(x, k)?.indices().to_vec())
        });
        let x = &prior.support()[pick % prior.len()];
        let msg = HighlightSet::reveal(planner.contextual_deviation(x, k).unwrap().indices(), x).unwrap();
        let naive = naive_posterior_discrete(&prior, &msg).unwrap();
        let soph = sophisticated_posterior_discrete(&prior, &policy, &msg).unwrap();
        for post in [&naive, &soph] {
            prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for z in soph.support() {
            prop_assert!(naive.support().contains(z));
        }
    }

    #[test]
    fn total_probability_recovers_prior(prior in discrete_prior(3), k in 1usize..3) {
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let policy = FnHighlighter::new("greedy", k, |x: &[f64]| {
            Ok(planner.contextual_greedy(x, k, true)?.indices().to_vec())
        });
        let mut messages: Vec<HighlightSet> = Vec::new();
        for x in prior.support() {
            let msg = HighlightSet::reveal(planner.contextual_greedy(x, k, true).unwrap().indices(), x).unwrap();
            if !messages.contains(&msg) {
                messages.push(msg);
            }
        }
        let mut mixed = vec![0.0; prior.len()];
        for msg in &messages {
            let mass: f64 = prior
                .iter()
                .filter(|(x, _)| {
                    planner.contextual_greedy(x, k, true).unwrap().indices() == msg.indices() && msg.matches(x)
                })
                .map(|(_, p)| p)
                .sum();
            let post = sophisticated_posterior_discrete(&prior, &policy, msg).unwrap();
            for (z, q) in post.iter() {
                mixed[prior.position(z).unwrap()] += mass * q;
            }
        }
        for (m, p) in mixed.iter().zip(prior.probs()) {
            prop_assert!((m - p).abs() < 1e-12);
        }
    }

    #[test]
    fn sophisticated_risk_never_exceeds_naive(prior in discrete_prior(3), k in 1usize..3) {
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        for (name, choose) in heuristics(k) {
            let policy = FnHighlighter::new(name, k, |x: &[f64]| Ok(choose(&planner, x)));
            let rs = risk_exact_discrete(&prior, &policy, AgentType::Sophisticated, &loss).unwrap();
            let rn = risk_exact_discrete(&prior, &policy, AgentType::Naive, &loss).unwrap();
            prop_assert!(rs.expected_loss <= rn.expected_loss + SLACK, "{name}: {} > {}", rs.expected_loss, rn.expected_loss);
        }
    }

    #[test]
    fn exact_search_dominates_pointwise(prior in discrete_prior(3), k in 1usize..3) {
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        for x in prior.support() {
            let best = prior.naive_loss(planner.contextual_exact(x, k).unwrap().indices(), x, &loss).unwrap();
            for (name, choose) in heuristics(k) {
                let chosen = choose(&planner, x);
                prop_assert!(chosen.len() <= k && chosen.windows(2).all(|w| w[0] < w[1]));
                let other = prior.naive_loss(&chosen, x, &loss).unwrap();
                prop_assert!(best <= other + SLACK, "{name} beat exact at {x:?}");
            }
        }
    }

    #[test]
    fn fixed_search_ordering(prior in discrete_prior(3), k in 1usize..3) {
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&prior, &loss);
        let sample = TrainingSample::from_discrete(&prior);
        let exact = planner.fixed_exact(k, &sample).unwrap();
        let stepwise = planner.fixed_forward_stepwise(k, &sample, false).unwrap();
        let step_loss = prior.fixed_set_loss(&stepwise.prefix(k), &sample, &loss).unwrap();
        let none = prior.fixed_set_loss(&[], &sample, &loss).unwrap();
        prop_assert!(exact.loss <= step_loss + SLACK);
        prop_assert!(step_loss <= none + SLACK);

        let contextual = FnHighlighter::new("exact", k, |x: &[f64]| {
            Ok(planner.contextual_exact(x, k)?.indices().to_vec())
        });
        let rn = risk_exact_discrete(&prior, &contextual, AgentType::Naive, &loss).unwrap();
        prop_assert!(rn.expected_loss <= exact.loss + SLACK);
    }

    #[test]
    fn independence_collapse(means in prop::collection::vec(0.02f64..0.98, 2..6), k in 1usize..4, code in 0u32..64) {
        let d = means.len();
        let k = k.min(d);
        let belief = BernoulliBelief::new(means).unwrap();
        let loss = LossSpec::SquaredRecovery;
        let planner = Planner::new(&belief, &loss);
        let x: Vec<f64> = (0..d).map(|j| f64::from((code >> j) & 1)).collect();
        let losses = [
            planner.contextual_deviation(&x, k).unwrap(),
            planner.contextual_marginal(&x, k).unwrap(),
            planner.contextual_greedy(&x, k, false).unwrap(),
            planner.contextual_exact(&x, k).unwrap(),
        ]
        .map(|msg| belief.naive_loss(msg.indices(), &x, &loss).unwrap());
        for l in &losses[1..] {
            prop_assert!((l - losses[0]).abs() < 1e-12, "{losses:?}");
        }
    }

    #[test]
    fn private_information_helps(prior in discrete_prior(3).prop_filter("three features", |p| p.dim() == 3)) {
        let loss = LossSpec::SquaredRecovery;
        let machine = prior.marginal(&[0, 1]).unwrap();
        let planner = Planner::new(&machine, &loss);
        let policy = FnHighlighter::new("deviation", 1, |x: &[f64]| {
            Ok(planner.contextual_deviation(x, 1)?.indices().to_vec())
        });
        let (with, without) = risk_sophisticated_with_private_info(&prior, &[2], &policy, &loss).unwrap();
        prop_assert!(with.expected_loss <= without.expected_loss + SLACK);
    }

    #[test]
    fn deviation_near_optimal_under_weak_mean_shift(prior in discrete_prior(3), k in 1usize..3) {
        let check = deviation_bound_check(&prior, k).unwrap();
        prop_assert!(check.holds(), "{check:?}");
        prop_assert!(check.deviation_risk + SLACK >= check.optimal_risk);
    }

    #[test]
    fn bayes_action_beats_perturbations(
        prior in discrete_prior(3),
        alpha in 0.0f64..1.0,
        shifts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 100),
    ) {
        let d = prior.dim();
        let outcome = OutcomeModel::Linear { intercept: 0.5, coefficients: (0..d).map(|j| 1.0 - j as f64).collect() };
        let losses = [
            LossSpec::SquaredRecovery,
            LossSpec::outcome_targeted(alpha, outcome).unwrap(),
            LossSpec::weighted_normalized(alpha, vec![1.0; d], prior.variances(), 0).unwrap_or(LossSpec::SquaredRecovery),
        ];
        for loss in &losses {
            let expected = |a: &Action| prior.expect(|x| realized_loss(a, x, None, loss).unwrap());
            let best = bayes_action(&prior, loss).unwrap();
            let base = expected(&best);
            prop_assert!(base >= 0.0);
            for s in &shifts {
                let mut a = best.clone();
                for j in 0..d {
                    a.x_hat[j] += s[j];
                }
                if let Some(y) = a.y_hat.as_mut() {
                    *y += s[3];
                }
                prop_assert!(base <= expected(&a) + SLACK);
            }
            for x in prior.support() {
                let exact = Action { x_hat: x.clone(), y_hat: best.y_hat.map(|_| match loss {
                    LossSpec::OutcomeTargeted { outcome, .. } => outcome.evaluate(x).unwrap(),
                    _ => x[0],
                }) };
                prop_assert_eq!(realized_loss(&exact, x, None, loss).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn gaussian_conditioning_is_idempotent(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        mean in prop::collection::vec(-2.0f64..2.0, 3),
        values in prop::collection::vec(-3.0f64..3.0, 2),
        first in 0usize..3,
    ) {
        let a = nalgebra::DMatrix::from_vec(3, 3, entries);
        let cov = &a * a.transpose() + nalgebra::DMatrix::identity(3, 3) * 0.1;
        let prior = GaussianBelief::new(nalgebra::DVector::from_vec(mean), cov).unwrap();
        let second = (first + 1) % 3;
        let mut idx = vec![first, second];
        idx.sort_unstable();
        let msg = HighlightSet::new(idx, values).unwrap();
        let once = prior.condition(&msg).unwrap();
        let twice = once.condition(&msg).unwrap();
        for (u, v) in once.mean().iter().zip(twice.mean().iter()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        for (u, v) in once.cov().iter().zip(twice.cov().iter()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }
}
