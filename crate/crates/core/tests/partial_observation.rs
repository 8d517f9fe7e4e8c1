//! Properties of the partially observed problem.

use proptest::prelude::*;

use mflqg::control::optimal_feedback;
use mflqg::partial_obs::{
    analytic_partial_phi, cost_decomposition_check, error_variance, partial_value,
    partial_value_from_phi, reduced_problem, run_partial, PartialObsSpec,
};
use mflqg::riccati::solve_riccati;
use mflqg::simulate::SimConfig;

fn numeric_value(spec: &PartialObsSpec) -> f64 {
    let sol = solve_riccati(&reduced_problem(spec), 1000).unwrap();
    partial_value(spec, &sol).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn numeric_value_matches_closed_form(
        observability in 0.0..=1.0f64,
        initial in 0.0..=1.0f64,
        s in 0.0..0.8f64,
        x in -2.0..2.0f64,
        linear in any::<bool>(),
    ) {
        let (preset, base) = if linear {
            ("example3", PartialObsSpec::example3())
        } else {
            ("example4", PartialObsSpec::example4())
        };
        let spec = PartialObsSpec {
            s,
            x,
            eta_hat: initial.sqrt(),
            eta_tilde: (1.0 - initial).sqrt(),
            ..base.reweighted(observability).unwrap()
        };
        let closed = partial_value_from_phi(&spec, analytic_partial_phi(preset, &spec, s).unwrap());
        prop_assert!((numeric_value(&spec) - closed).abs() <= 1e-6);
    }

    #[test]
    fn error_variance_is_affine_in_time(observability in 0.0..=1.0f64, s in 0.0..0.5f64, u in 0.0..=1.0f64) {
        let spec = PartialObsSpec { s, ..PartialObsSpec::example3().reweighted(observability).unwrap() };
        let t = s + u * (spec.horizon - s);
        let expected = spec.eta_tilde.powi(2) * s + spec.sigma_tilde.powi(2) * (t - s);
        prop_assert!((error_variance(&spec, t).unwrap() - expected).abs() <= 1e-14);
    }

    #[test]
    fn more_observability_never_costs_more(o1 in 0.0..=1.0f64, o2 in 0.0..=1.0f64, x in -2.0..2.0f64) {
        let base = PartialObsSpec { x, ..PartialObsSpec::example3() };
        let (lo, hi) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
        let v_lo = numeric_value(&base.reweighted(lo).unwrap());
        let v_hi = numeric_value(&base.reweighted(hi).unwrap());
        prop_assert!(v_hi <= v_lo + 1e-12);
    }

    #[test]
    fn mean_field_terminal_cost_ignores_observability(o in 0.0..=1.0f64, x in -2.0..2.0f64) {
        let base = PartialObsSpec { x, ..PartialObsSpec::example4() };
        let reference = numeric_value(&base.reweighted(0.5).unwrap());
        prop_assert!((numeric_value(&base.reweighted(o).unwrap()) - reference).abs() <= 1e-10);
    }
}

#[test]
fn value_outside_unit_split_rejected() {
    assert!(PartialObsSpec::example3().reweighted(1.5).is_err());
    assert!(PartialObsSpec::with_observability(-0.1, 1.0, 0.0).is_err());
}

#[test]
fn decomposition_and_independence_hold_in_simulation() {
    let spec = PartialObsSpec::example3();
    let reduced = reduced_problem(&spec);
    let law = optimal_feedback(&reduced, &solve_riccati(&reduced, 1000).unwrap()).unwrap();
    let config = SimConfig::new(20_000, 0.01, 5);
    let d = cost_decomposition_check(&spec, &law, &config).unwrap();
    assert!(d.defect.abs() <= 3.0 * d.std_error, "{d:?}");
    let run = run_partial(&spec, &law, &config).unwrap();
    let corr = mflqg::partial_obs::correlation(&run.errors, &run.predictions);
    assert!(
        corr.abs() <= 3.0 / (config.n_paths as f64).sqrt(),
        "corr {corr}"
    );
}

#[test]
fn simulated_cost_reproducible() {
    let spec = PartialObsSpec::example4();
    let reduced = reduced_problem(&spec);
    let law = optimal_feedback(&reduced, &solve_riccati(&reduced, 1000).unwrap()).unwrap();
    let config = SimConfig::new(3000, 0.01, 8);
    let a = run_partial(&spec, &law, &config).unwrap();
    let b = run_partial(&spec, &law, &config).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.errors, b.errors);
}
