//! Built-in scenario sets: efficiency grid, testing dependence, incidence and recall-bias violations.

use super::{CalibrationDesign, MetricsTable, PlotPoint, ScenarioConfig};
use crate::estimators::Method;
use crate::simulate::{EpidemicParams, GeneralizedGamma, PriorTestingSpec, RecallBiasSpec, TrueAssay};

pub const SAMPLE_SIZE: usize = 5000;
pub const PIECEWISE_RHO: f64 = 0.0039;

pub fn base_epidemic() -> EpidemicParams {
    EpidemicParams::constant(0.032, 0.29, 2.0)
}

pub fn base_scenario(name: &str, prior_testing: PriorTestingSpec, replicates: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        sample_size: SAMPLE_SIZE,
        replicates,
        epidemic: base_epidemic(),
        assay_truth: TrueAssay::default(),
        calibration: CalibrationDesign::default(),
        prior_testing,
        recall_bias: None,
        estimators: vec![Method::Standard, Method::Enhanced],
        level: 0.95,
        seed,
    }
}

pub const WINDOWS: [(f64, f64); 3] = [(0.0, 2.0), (0.0, 4.0), (2.0, 4.0)];
pub const AVAILABILITY: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Uniform prior tests over each window at each availability level.
pub fn efficiency_grid(replicates: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &(a, b) in &WINDOWS {
        for &q in &AVAILABILITY {
            out.push(base_scenario(
                &format!("uniform_{a}_{b}_q{q}"),
                PriorTestingSpec::Uniform { q, a, b },
                replicates,
                seed,
            ));
        }
    }
    out
}

/// Uniform baseline testing alone and combined with infection-driven tests.
pub fn testing_dependence(replicates: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for q in [0.25, 0.5, 0.75] {
        out.push(base_scenario(
            &format!("base_q{q}"),
            PriorTestingSpec::Uniform { q, a: 0.0, b: 4.0 },
            replicates,
            seed,
        ));
        out.push(base_scenario(
            &format!("base_ri_q{q}"),
            PriorTestingSpec::Mixed {
                q_prime: q,
                a_prime: 0.0,
                b_prime: 4.0,
                delay: GeneralizedGamma::default(),
            },
            replicates,
            seed,
        ));
    }
    out
}

/// Constant and piecewise incidence with prior tests reaching back 4 or 12 years.
pub fn incidence_violation(replicates: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for (label, rho) in [("constant", 0.0), ("piecewise", PIECEWISE_RHO)] {
        for tau in [4.0, 12.0] {
            let mut c = base_scenario(
                &format!("{label}_tau{tau}"),
                PriorTestingSpec::Uniform { q: 0.5, a: 0.0, b: tau },
                replicates,
                seed,
            );
            c.epidemic.rho = rho;
            c.estimators = vec![Method::Standard, Method::Enhanced, Method::EnhancedOnlyRecent];
            out.push(c);
        }
    }
    out
}

/// Misreported prior tests: time jitter of 1 or 6 months, 10% of positive
/// tests unreported, 10% of positive results reported negative.
pub fn recall_bias(replicates: usize, seed: u64) -> Vec<ScenarioConfig> {
    let perturbations = [
        ("none", RecallBiasSpec::default()),
        ("jitter_1m", RecallBiasSpec { time_jitter_sd: 1.0 / 12.0, ..Default::default() }),
        ("jitter_6m", RecallBiasSpec { time_jitter_sd: 0.5, ..Default::default() }),
        ("nonreport_10", RecallBiasSpec { nonreport_positive_prob: 0.1, ..Default::default() }),
        ("flip_10", RecallBiasSpec { flip_positive_prob: 0.1, ..Default::default() }),
    ];
    perturbations
        .into_iter()
        .map(|(label, bias)| {
            let mut c = base_scenario(
                &format!("recall_{label}"),
                PriorTestingSpec::Uniform { q: 0.5, a: 0.0, b: 4.0 },
                replicates,
                seed,
            );
            c.recall_bias = (bias != RecallBiasSpec::default()).then_some(bias);
            c
        })
        .collect()
}

pub const BUILTIN: [&str; 5] = ["base", "efficiency", "testing-dependence", "incidence", "recall-bias"];

pub fn builtin(name: &str, replicates: usize, seed: u64) -> Option<Vec<ScenarioConfig>> {
    Some(match name {
        "base" => vec![base_scenario("base", PriorTestingSpec::None, replicates, seed)],
        "efficiency" => efficiency_grid(replicates, seed),
        "testing-dependence" => testing_dependence(replicates, seed),
        "incidence" => incidence_violation(replicates, seed),
        "recall-bias" => recall_bias(replicates, seed),
        _ => return None,
    })
}

/// MSE reduction against availability, one series per uniform window.
pub fn reduction_points(configs: &[ScenarioConfig], tables: &[MetricsTable]) -> Vec<PlotPoint> {
    configs
        .iter()
        .zip(tables)
        .filter_map(|(c, t)| match c.prior_testing {
            PriorTestingSpec::Uniform { q, a, b } => Some(PlotPoint {
                series: format!("({a}, {b})"),
                x: q,
                y: t.row(Method::Enhanced)?.pct_mse_reduction?,
            }),
            _ => None,
        })
        .collect()
}
