//! Contextual search on Gaussian priors against brute force over subsets,
//! with posteriors from the batch Schur-complement formula.

use highlight_core::loss::{action_from_mean, realized_loss};
use highlight_core::policies::Planner;
use highlight_core::{seeded_stream, GaussianBelief, HighlightSet, LossSpec, PriorSampler};
use nalgebra::{DMatrix, DVector};
use rand::RngExt;

fn random_prior(seed: u64, d: usize) -> GaussianBelief {
    let mut rng = seeded_stream(seed, 0);
    let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    let mean = DVector::from_fn(d, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    GaussianBelief::new(mean, cov).unwrap()
}

fn batch_loss(prior: &GaussianBelief, set: &[usize], x: &[f64], loss: &LossSpec) -> f64 {
    let msg = HighlightSet::reveal(set, x).unwrap();
    let mean = prior.conditional_mean(&msg).unwrap();
    realized_loss(&action_from_mean(mean, loss).unwrap(), x, None, loss).unwrap()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|&j| m >> j & 1 == 1).collect())
        .collect()
}

#[test]
fn contextual_exact_attains_the_subset_minimum() {
    let d = 7;
    for seed in 0..6 {
        let prior = random_prior(seed, d);
        let weights = vec![0.0, 0.3, 0.1, 0.2, 0.15, 0.05, 0.2];
        let loss = LossSpec::weighted_normalized(0.5, weights, prior.variances(), 0).unwrap();
        let revealable: Vec<usize> = (1..d).collect();
        let planner = Planner::new(&prior, &loss).with_revealable(revealable.clone()).unwrap();
        let mut rng = seeded_stream(seed, 1);
        for _ in 0..20 {
            let x = prior.sample(&mut rng);
            for k in 1..=3 {
                let best = subsets(revealable.len(), k)
                    .into_iter()
                    .map(|s| {
                        let set: Vec<usize> = s.iter().map(|&p| revealable[p]).collect();
                        batch_loss(&prior, &set, &x, &loss)
                    })
                    .fold(f64::INFINITY, f64::min);
                let chosen = planner.contextual_exact(&x, k).unwrap();
                assert!(chosen.len() <= k);
                let got = batch_loss(&prior, chosen.indices(), &x, &loss);
                assert!((got - best).abs() < 1e-8 * (1.0 + best), "seed {seed} k {k}: {got} vs {best}");

                // Greedy never beats the exact search.
                let greedy = planner.contextual_greedy(&x, k, false).unwrap();
                assert!(batch_loss(&prior, greedy.indices(), &x, &loss) >= best - 1e-8);
            }
        }
    }
}
