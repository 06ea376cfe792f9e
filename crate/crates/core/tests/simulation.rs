use statrs::distribution::{ContinuousCDF, Continuous, Normal};

use recency_core::assay::TestRecentFunction;
use recency_core::estimators::Sample;
use recency_core::harness::run_scenario;
use recency_core::harness::scenarios::base_scenario;
use recency_core::rng::{substream, Purpose};
use recency_core::simulate::{
    apply_recall_bias, draw_prior_test_uniform, draw_recency_result, simulate_calibration_dataset,
    simulate_cross_section, solve_ct, EpidemicParams, GeneralizedGamma, PriorTestingSpec, RecallBiasSpec,
    TrueAssay,
};
use recency_core::estimators::{Method, PriorTriple};

// |x − mean| within k binomial standard deviations
fn within_sd(hits: usize, n: usize, p: f64, k: f64) -> bool {
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - n as f64 * p).abs() <= k * sd
}

fn recent_share(sample: &Sample) -> (usize, usize) {
    let c = sample.counts(2.0);
    (c.n_rec, c.n_pos)
}

#[test]
fn recent_fraction_matches_duration_integral() {
    let f = TrueAssay::default().phi().unwrap();
    let params = EpidemicParams::constant(0.032, 0.29, 2.0);
    let c_t = solve_ct(&params).unwrap();
    let k = params.prevalence / (1.0 - params.prevalence);
    let expected = params.lambda / k * (f.mdri() + f.frr_tail() * (c_t - 2.0));
    let sample = simulate_cross_section(345_000, &params, &f, &PriorTestingSpec::None, None, 7).unwrap();
    let (rec, pos) = recent_share(&sample);
    assert!(pos > 95_000);
    assert!(within_sd(rec, pos, expected, 4.0), "{rec}/{pos} vs {expected}");
}

#[test]
fn tests_inside_window_only_add_recent_calls() {
    let f = TrueAssay::default().phi().unwrap();
    let params = EpidemicParams::constant(0.032, 0.29, 2.0);
    let spec = PriorTestingSpec::Uniform { q: 1.0, a: 0.0, b: 2.0 };
    let sample = simulate_cross_section(20_000, &params, &f, &spec, None, 8).unwrap();
    let c = sample.counts(2.0);
    assert!(c.n_rec_pt >= c.n_rec);
    assert!(c.n_rec_pt > c.n_rec, "recent negatives should be reclassified");
}

#[test]
fn near_total_prevalence_keeps_negatives_rare() {
    let f = TrueAssay::default().phi().unwrap();
    let params = EpidemicParams::constant(0.032, 0.999, 2.0);
    let sample = simulate_cross_section(50_000, &params, &f, &PriorTestingSpec::None, None, 9).unwrap();
    let c = sample.counts(2.0);
    assert!(within_sd(c.n_pos, c.n, 0.999, 4.0));
    // almost all positives are long past the window, so φ ≈ β
    let c_t = solve_ct(&params).unwrap();
    let k = 0.999 / 0.001;
    let expected = 0.032 / k * (f.mdri() + f.frr_tail() * (c_t - 2.0));
    assert!(within_sd(c.n_rec, c.n_pos, expected, 4.0));
}

#[test]
fn constant_half_phi_draws_half() {
    let f = TestRecentFunction::constant(0.5, 0.5, 2.0).unwrap();
    let mut rng = substream(3, 0, Purpose::Oracle, 0);
    let n = 100_000;
    let hits = (0..n).filter(|i| draw_recency_result(&f, (*i % 400) as f64 / 100.0, &mut rng).unwrap()).count();
    assert!(within_sd(hits, n, 0.5, 4.0));
}

#[test]
fn uniform_results_split_at_infection_time() {
    let mut rng = substream(4, 0, Purpose::Oracle, 0);
    let n = 100_000;
    let draws: Vec<PriorTriple> = (0..n).map(|_| draw_prior_test_uniform(1.0, 0.0, 4.0, 2.0, &mut rng)).collect();
    let pos = draws.iter().filter(|p| p.result == Some(true)).count();
    assert!(draws.iter().all(|p| p.has_prior));
    assert!(within_sd(pos, n, 0.5, 4.0));
}

#[test]
fn jitter_matches_clamped_normal() {
    let (t, sd) = (0.2, 0.5);
    let spec = RecallBiasSpec { time_jitter_sd: sd, nonreport_positive_prob: 0.0, flip_positive_prob: 0.0 };
    let mut rng = substream(5, 0, Purpose::Oracle, 0);
    let n = 200_000;
    let xs: Vec<f64> = (0..n)
        .map(|_| apply_recall_bias(PriorTriple::tested(t, false), &spec, &mut rng).time.unwrap())
        .collect();
    let z = Normal::new(0.0, 1.0).unwrap();
    let a = t / sd;
    // moments of max(0, X), X ~ N(t, sd²)
    let m1 = t * z.cdf(a) + sd * z.pdf(a);
    let m2 = (t * t + sd * sd) * z.cdf(a) + t * sd * z.pdf(a);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let second = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let sd_mean = (m2 - m1 * m1).sqrt() / (n as f64).sqrt();
    assert!((mean - m1).abs() < 4.0 * sd_mean, "{mean} vs {m1}");
    assert!((second - m2).abs() < 0.01 * m2);
    let zeros = xs.iter().filter(|&&x| x == 0.0).count();
    assert!(within_sd(zeros, n, z.cdf(-a), 4.0));
}

#[test]
fn single_visit_grid_is_binomial() {
    let f = TrueAssay::default().phi().unwrap();
    let data = simulate_calibration_dataset(&f, 20_000, &[0.1], 11).unwrap();
    assert_eq!(data.len(), 20_000);
    let hits = data.iter().filter(|r| r.recent).count();
    assert!(within_sd(hits, data.len(), f.phi(0.1).unwrap(), 4.0));
}

#[test]
fn infection_driven_base_uses_expected_share() {
    let spec = PriorTestingSpec::Mixed {
        q_prime: 0.25,
        a_prime: 0.0,
        b_prime: 4.0,
        delay: GeneralizedGamma::default(),
    };
    let mut config = base_scenario("base_ri", spec, 20, 12);
    config.estimators = vec![Method::Standard, Method::Enhanced];
    let table = run_scenario(&config).unwrap();
    let q = table.row(Method::Enhanced).unwrap().q_star.unwrap();
    assert!((q - 0.633).abs() < 0.05, "q* = {q}");
}
