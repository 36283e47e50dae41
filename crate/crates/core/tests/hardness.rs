use highlight_core::hardness::{
    branch_and_bound_value, brute_force_sophisticated_value, brute_force_two_means, build_reduction,
    exhaustive_value, PoolingProblem, StateKind, DEFAULT_SEARCH_CAP,
};
use highlight_core::seeded_stream;
use rand::RngExt;

/// Centroid form of the 2-means cost, over every labelling of the points.
fn two_means_oracle(points: &[Vec<f64>]) -> f64 {
    let m = points.len();
    let p = points[0].len();
    let sse = |members: &[&Vec<f64>]| -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        let c: Vec<f64> = (0..p)
            .map(|j| members.iter().map(|z| z[j]).sum::<f64>() / members.len() as f64)
            .collect();
        members.iter().map(|z| (0..p).map(|j| (z[j] - c[j]).powi(2)).sum::<f64>()).sum()
    };
    (0..1u32 << m)
        .map(|mask| {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, z) in points.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    a.push(z);
                } else {
                    b.push(z);
                }
            }
            sse(&a) + sse(&b)
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_points(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_stream(seed, 0);
    let m = rng.random_range(2..=6);
    let p = rng.random_range(1..=2);
    (0..m)
        .map(|_| (0..p).map(|_| (rng.random::<f64>() * 8.0 - 4.0).round() / 2.0 + rng.random::<f64>() * 0.1).collect())
        .collect()
}

#[test]
fn sophisticated_optimum_equals_two_means() {
    for seed in 0..25 {
        let points = random_points(seed);
        let opt = two_means_oracle(&points);
        assert!((brute_force_two_means(&points).unwrap() - opt).abs() < 1e-9);
        let inst = build_reduction(&points, (opt + 1.0).ceil()).unwrap();
        let structured = brute_force_sophisticated_value(&inst, 1).unwrap();
        assert!((structured.total - opt).abs() < 1e-9, "seed {seed}: {} vs {opt}", structured.total);
        assert_eq!(inst.pooling_violations(&structured.assignment), (0, 0));
    }
}

#[test]
fn full_policy_search_agrees_and_never_pools_gadgets() {
    for seed in 100..106 {
        let points = random_points(seed);
        let opt = two_means_oracle(&points);
        let inst = build_reduction(&points, opt.ceil() + 2.0).unwrap();
        let full = branch_and_bound_value(&inst, DEFAULT_SEARCH_CAP).unwrap();
        assert!((full.total - opt).abs() < 1e-9, "seed {seed}: {} vs {opt}", full.total);
        assert_eq!(inst.pooling_violations(&full.assignment), (0, 0));
    }
}

#[test]
fn reduction_structure() {
    let points = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
    assert!((brute_force_two_means(&points).unwrap() - 1.0).abs() < 1e-12);
    let inst = build_reduction(&points, 3.0).unwrap();
    assert_eq!(inst.d, 6);
    assert_eq!(inst.n, 4 + 2 * 6 - 1);
    assert_eq!(inst.big_loss, 4.0);
    let support = inst.prior.support();
    for (s, kind) in inst.kinds.iter().enumerate() {
        let head = &support[s][..2];
        match kind {
            StateKind::Data { .. } => assert_eq!(head, &[0.0, 0.0]),
            StateKind::Gadget { signal } => {
                assert_eq!(head, &[1.0, 1.0]);
                assert!(inst.options(s).contains(&signal.id()));
            }
        }
    }
    let tails: Vec<&[f64]> = (0..4).map(|s| &support[s][2..]).collect();
    for a in 0..4 {
        for b in (a + 1)..4 {
            assert_ne!(tails[a], tails[b]);
        }
    }
    assert!(serde_json::to_string(&inst).unwrap().contains("big_loss"));

    let many: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i)]).collect();
    assert_eq!(build_reduction(&many, 1.0).unwrap().d, 2 + 6);
    assert_eq!(brute_force_two_means(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(), 0.0);
    assert_eq!(brute_force_two_means(&[vec![0.0], vec![5.0]]).unwrap(), 0.0);
}

/// Scalars pooled under a common prediction, plus a fixed charge per
/// nonempty pool; states may use a random subset of the signals.
struct ScalarPooling {
    values: Vec<f64>,
    options: Vec<Vec<usize>>,
    signals: usize,
    charge: f64,
}

impl PoolingProblem for ScalarPooling {
    fn n_states(&self) -> usize {
        self.values.len()
    }

    fn n_signals(&self) -> usize {
        self.signals
    }

    fn options(&self, s: usize) -> Vec<usize> {
        self.options[s].clone()
    }

    fn pool_cost(&self, pool: &[usize]) -> f64 {
        if pool.is_empty() {
            return 0.0;
        }
        let mean = pool.iter().map(|&s| self.values[s]).sum::<f64>() / pool.len() as f64;
        self.charge + pool.iter().map(|&s| (self.values[s] - mean).powi(2)).sum::<f64>()
    }
}

#[test]
fn pruned_search_matches_unpruned_on_small_problems() {
    for seed in 0..30 {
        let mut rng = seeded_stream(seed, 7);
        let n = rng.random_range(2..=10);
        let signals = rng.random_range(2..=4);
        let options = (0..n)
            .map(|_| {
                let mut o: Vec<usize> = (0..signals).filter(|_| rng.random::<f64>() < 0.6).collect();
                if o.is_empty() {
                    o.push(rng.random_range(0..signals));
                }
                o
            })
            .collect();
        let problem = ScalarPooling {
            values: (0..n).map(|_| rng.random::<f64>() * 4.0).collect(),
            options,
            signals,
            charge: rng.random::<f64>(),
        };
        let pruned = branch_and_bound_value(&problem, DEFAULT_SEARCH_CAP).unwrap();
        let full = exhaustive_value(&problem, DEFAULT_SEARCH_CAP).unwrap();
        assert!((pruned.value - full.value).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn unpruned_search_refuses_reduction_instances() {
    let inst = build_reduction(&[vec![0.0], vec![1.0]], 1.0).unwrap();
    assert!(exhaustive_value(&inst, DEFAULT_SEARCH_CAP).is_err());
}
