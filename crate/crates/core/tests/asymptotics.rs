use highlight_core::asymptotics::{asymptotic_report, finite_d_simulation, LimitCdf, LimitModel, Procedure};
use highlight_core::AgentType;

const D: usize = 20_000;
const TRIALS: usize = 50;

/// Closed forms for the triangular model, whose folded quantile is √q/2:
/// the antiderivative of Q*(1 − Q*) is q^{3/2}/3 − q²/8 and that of
/// Q*²(1 − Q*) is q²/8 − q^{5/2}/20.
fn triangular_oracle(alpha: f64) -> (f64, f64, f64, f64) {
    let var = |q: f64| q.powf(1.5) / 3.0 - q * q / 8.0;
    let head = |q: f64| q * q / 8.0 - q.powf(2.5) / 20.0;
    let beta = (3.0 * alpha).powf(2.0 / 3.0);
    let fixed = var(1.0 - alpha);
    let soph = var(1.0) - var(beta);
    (fixed, beta, soph, soph + head(beta))
}

#[test]
fn iid_limits_match_closed_forms() {
    let (p, alpha) = (0.3, 0.15);
    let model = LimitModel::new(LimitCdf::point_mass(p), alpha).unwrap();
    assert!((model.fixed_limit_risk() - 0.1785).abs() < 1e-12);
    let beta = model.beta_star().unwrap();
    assert!((beta - 0.5).abs() < 1e-10);
    let (soph, naive) = model.greedy_limit_risks().unwrap();
    assert!((soph - 0.105).abs() < 1e-10);
    assert!((naive - 0.1365).abs() < 1e-10);
    // (1 − α/p) p(1 − p) and the naive excess (α/p) p²(1 − p).
    assert!((soph - (1.0 - alpha / p) * p * (1.0 - p)).abs() < 1e-10);
    assert!((naive - soph - alpha * p * (1.0 - p)).abs() < 1e-10);
}

#[test]
fn triangular_limits_match_closed_forms() {
    for alpha in [0.05, 0.15, 0.25, 0.3] {
        let model = LimitModel::new(LimitCdf::triangular(), alpha).unwrap();
        let (fixed, beta, soph, naive) = triangular_oracle(alpha);
        assert!((model.bandwidth_bound() - 1.0 / 3.0).abs() < 1e-9);
        assert!((model.fixed_limit_risk() - fixed).abs() < 1e-8, "α = {alpha}");
        assert!((model.beta_star().unwrap() - beta).abs() < 1e-7);
        let (s, n) = model.greedy_limit_risks().unwrap();
        assert!((s - soph).abs() < 1e-8 && (n - naive).abs() < 1e-8);
    }
    assert!((triangular_oracle(0.25).1 - 0.825).abs() < 1e-3);
}

#[test]
fn beta_star_is_self_consistent() {
    for model in [
        LimitModel::new(LimitCdf::point_mass(0.2), 0.1).unwrap(),
        LimitModel::new(LimitCdf::triangular(), 0.2).unwrap(),
        LimitModel::new(LimitCdf::Step(vec![0.1, 0.25, 0.4, 0.9]), 0.12).unwrap(),
    ] {
        let beta = model.beta_star().unwrap();
        assert!((model.integrate_quantile(0.0, beta, |p| p) - model.alpha()).abs() < 1e-9);
    }
    assert!(LimitModel::new(LimitCdf::point_mass(0.3), 0.31).unwrap().beta_star().is_err());
}

#[test]
fn limit_monotonicity_and_gap_sign() {
    for cdf in [LimitCdf::point_mass(0.3), LimitCdf::triangular()] {
        let base = LimitModel::new(cdf, 0.01).unwrap();
        let bound = base.bandwidth_bound();
        let mut last_fixed = f64::INFINITY;
        let mut last_greedy = f64::INFINITY;
        for i in 1..20 {
            let alpha = bound * f64::from(i) / 20.0;
            let model = base.with_alpha(alpha).unwrap();
            let fixed = model.fixed_limit_risk();
            let (soph, naive) = model.greedy_limit_risks().unwrap();
            assert!(fixed <= last_fixed + 1e-12);
            assert!(soph <= last_greedy + 1e-12);
            assert!(naive >= soph);
            assert!(soph <= fixed + 1e-12);
            last_fixed = fixed;
            last_greedy = soph;
        }
        let full = base.integrate_quantile(0.0, 1.0, |p| p * (1.0 - p));
        let (s0, n0) = base.fraction_limit_risks(0.0);
        assert!((s0 - full).abs() < 1e-12 && (n0 - full).abs() < 1e-12);
    }
}

#[test]
fn zero_bandwidth_is_prior_variance() {
    let probs = vec![0.1, 0.3, 0.6, 0.8];
    let expected = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() / 4.0;
    let sim = finite_d_simulation(&probs, 0, Procedure::Fixed, AgentType::Naive, 20_000, 3).unwrap();
    assert!((sim.mean - expected).abs() < 4.0 * sim.std_error + 1e-12);
}

fn check_report(id: &str, model: &LimitModel) {
    let rows = asymptotic_report(id, model, D, TRIALS, 11).unwrap();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let rel = (row.simulated - row.formula).abs() / row.formula;
        assert!(rel <= 0.02, "{id} {} {:?}: simulated {} vs {}", row.procedure, row.agent, row.simulated, row.formula);
    }
}

#[test]
fn finite_dimension_converges_iid() {
    check_report("iid", &LimitModel::new(LimitCdf::point_mass(0.3), 0.15).unwrap());
}

#[test]
fn finite_dimension_converges_triangular() {
    check_report("triangular", &LimitModel::new(LimitCdf::triangular(), 0.25).unwrap());
}
