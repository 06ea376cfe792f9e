use recency_core::estimators::Method;
use recency_core::harness::scenarios::base_scenario;
use recency_core::harness::{oracle_variance_mc, oracle_w_delta, run_scenario, FrrCalibration};
use recency_core::simulate::PriorTestingSpec;

fn uniform(q: f64, a: f64, b: f64) -> PriorTestingSpec {
    PriorTestingSpec::Uniform { q, a, b }
}

#[test]
fn same_seed_same_metrics() {
    let mut c = base_scenario("det", uniform(0.5, 0.0, 4.0), 12, 21);
    c.sample_size = 2000;
    let a = run_scenario(&c).unwrap();
    let b = run_scenario(&c).unwrap();
    assert_eq!(a, b);
    c.seed = 22;
    assert_ne!(run_scenario(&c).unwrap(), a);
}

#[test]
fn single_replicate_has_no_spread() {
    let mut c = base_scenario("one", uniform(0.5, 0.0, 4.0), 1, 23);
    c.sample_size = 2000;
    let t = run_scenario(&c).unwrap();
    for row in &t.rows {
        assert!(row.se_undefined);
        assert_eq!(row.se, 0.0);
        assert!((row.mse - row.bias * row.bias).abs() <= 1e-15);
    }
}

#[test]
fn mse_decomposes_into_bias_and_spread() {
    let mut c = base_scenario("mse", uniform(0.6, 0.0, 4.0), 40, 24);
    c.sample_size = 2000;
    let t = run_scenario(&c).unwrap();
    for row in &t.rows {
        let r = (row.replicates - row.failures) as f64;
        let expected = row.bias.powi(2) + row.se.powi(2) * (r - 1.0) / r;
        assert!((row.mse - expected).abs() <= 1e-12 * row.mse.max(1e-12), "{row:?}");
    }
}

#[test]
fn degenerate_design_leaves_enhanced_unbiased() {
    let mut c = base_scenario("degenerate", uniform(1.0, 1.999, 2.0), 400, 25);
    c.assay_truth.frr = 0.0;
    c.calibration.use_true_phi = true;
    c.calibration.frr = FrrCalibration::Fixed { sd: 0.0 };
    let t = run_scenario(&c).unwrap();
    let row = t.row(Method::Enhanced).unwrap();
    let mc_se = row.se / ((row.replicates - row.failures) as f64).sqrt();
    assert!(row.bias.abs() <= 3.0 * mc_se, "bias {} vs mc se {}", row.bias, mc_se);
}

#[test]
fn delta_method_matches_simulated_w() {
    let c = base_scenario("wdelta", uniform(0.5, 0.0, 4.0), 5000, 26);
    let o = oracle_w_delta(&c).unwrap();
    assert!((o.ratio - 1.0).abs() < 0.05, "{o:?}");
}

#[test]
fn analytic_variance_tracks_replicates() {
    let c = base_scenario("var", uniform(1.0, 0.0, 2.0), 500, 27);
    let o = oracle_variance_mc(&c, Method::Enhanced).unwrap();
    assert!((0.85..=1.15).contains(&o.ratio), "{o:?}");
}
