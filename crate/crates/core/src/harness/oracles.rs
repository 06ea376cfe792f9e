use nalgebra::{Matrix5, Vector5};
use rand::Rng;
use rayon::prelude::*;

use super::{calibrate_replicate, run_scenario_detailed, ScenarioConfig};
use crate::assay::{pt_mdri, PriorTest, TestRecentFunction};
use crate::error::{Error, Result};
use crate::estimators::record::pt_recent;
use crate::estimators::{enhanced_point, lambda_gradient, Method, PriorTriple};
use crate::rng::{substream, Purpose};
use crate::simulate::{
    draw_infection_duration, simulate_replicate, solve_ct, CrossSectionDesign, EpidemicParams, PriorTestingSpec,
};

/// Analytic against Monte Carlo variance of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceOracle {
    pub empirical_var: f64,
    pub mean_analytic_var: f64,
    /// mean analytic variance / empirical variance
    pub ratio: f64,
    /// mean estimated SE / empirical SE
    pub see_over_se: f64,
    pub used: usize,
}

pub fn oracle_variance_mc(config: &ScenarioConfig, method: Method) -> Result<VarianceOracle> {
    if config.replicates < 500 {
        return Err(Error::domain("variance oracle needs at least 500 replicates"));
    }
    let mut config = config.clone();
    if !config.estimators.contains(&method) {
        config.estimators.push(method);
    }
    let k = config.estimators.iter().position(|&m| m == method).unwrap_or_default();
    let run = run_scenario_detailed(&config)?;
    let ok: Vec<_> = run.replicates.iter().filter_map(|r| r.estimates[k].as_ref().ok()).collect();
    if ok.len() < 2 {
        return Err(Error::estimation("too few successful replicates"));
    }
    let n = ok.len() as f64;
    let mean = ok.iter().map(|e| e.lambda).sum::<f64>() / n;
    let empirical_var = ok.iter().map(|e| (e.lambda - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_analytic_var = ok.iter().map(|e| e.variance).sum::<f64>() / n;
    let see = ok.iter().map(|e| e.variance.sqrt()).sum::<f64>() / n;
    Ok(VarianceOracle {
        empirical_var,
        mean_analytic_var,
        ratio: mean_analytic_var / empirical_var,
        see_over_se: see / empirical_var.sqrt(),
        used: ok.len(),
    })
}

/// Delta method applied to the Monte Carlo covariance of simulated W vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WDeltaOracle {
    pub delta_var: f64,
    pub empirical_var: f64,
    pub ratio: f64,
}

pub fn oracle_w_delta(config: &ScenarioConfig) -> Result<WDeltaOracle> {
    config.validate()?;
    let truth = config.assay_truth.phi()?;
    let draws: Vec<(Vector5<f64>, f64)> = (0..config.replicates)
        .into_par_iter()
        .filter_map(|r| {
            let (f, chars) = calibrate_replicate(config, &truth, r as u64).ok()?;
            let design = CrossSectionDesign {
                params: &config.epidemic,
                f: &truth,
                testing: &config.prior_testing,
                bias: config.recall_bias.as_ref(),
            };
            let sample = simulate_replicate(&design, config.sample_size, config.seed, r as u64).ok()?;
            let pt = enhanced_point(&sample, &f, &chars).ok()?;
            Some((pt.w, pt.lambda))
        })
        .collect();
    if draws.len() < 2 {
        return Err(Error::estimation("too few successful replicates"));
    }
    let n = draws.len() as f64;
    let w_mean = draws.iter().fold(Vector5::zeros(), |acc, (w, _)| acc + w) / n;
    let cov = draws.iter().fold(Matrix5::zeros(), |acc, (w, _)| {
        let d = w - w_mean;
        acc + d * d.transpose()
    }) / (n - 1.0);
    let l_mean = draws.iter().map(|d| d.1).sum::<f64>() / n;
    let empirical_var = draws.iter().map(|d| (d.1 - l_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let g = lambda_gradient(&w_mean, config.sample_size)?;
    let delta_var = (g.transpose() * cov * g)[(0, 0)];
    Ok(WDeltaOracle {
        delta_var,
        empirical_var,
        ratio: delta_var / empirical_var,
    })
}

/// Grid Monte Carlo against the closed form of the PT-RITA MDRI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtMdriOracle {
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub formula_value: f64,
    pub diff: f64,
}

/// A finite population of prior tests reproducing an infection-independent
/// mechanism: round(q·m) tests at the midpoints of m equal bins of [a, b].
pub fn prior_test_population(spec: &PriorTestingSpec, m: usize) -> Result<Vec<PriorTest>> {
    spec.validate()?;
    let none = PriorTest { has_prior: false, time: None };
    match *spec {
        PriorTestingSpec::None => Ok(vec![none]),
        PriorTestingSpec::Uniform { q, a, b } => {
            let tested = (q * m as f64).round() as usize;
            let mut out: Vec<PriorTest> = (0..tested)
                .map(|j| PriorTest {
                    has_prior: true,
                    time: Some(a + (b - a) * (j as f64 + 0.5) / tested as f64),
                })
                .collect();
            out.resize(m.max(1), none);
            Ok(out)
        }
        _ => Err(Error::domain("prior tests depend on the infection time")),
    }
}

/// Stratified Monte Carlo over u ∈ [0, T*]: each draw takes u uniformly in its
/// stratum, R ~ Bernoulli(φ(u)) and a prior test drawn from `population`.
pub fn oracle_pt_mdri_mc(
    f: &TestRecentFunction,
    population: &[PriorTest],
    n_draws: usize,
    seed: u64,
) -> Result<PtMdriOracle> {
    if n_draws < 10_000 {
        return Err(Error::domain("grid Monte Carlo needs at least 10^4 draws"));
    }
    if population.is_empty() {
        return Err(Error::domain("empty prior-test population"));
    }
    let formula_value = pt_mdri(f, population)?;
    let cutoff = f.cutoff();
    let strata = 200;
    let per = n_draws.div_ceil(strata);
    let results: Vec<(f64, f64)> = (0..strata)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, 0, Purpose::Oracle, j as u64);
            let mut hits = 0usize;
            for _ in 0..per {
                let u = cutoff * (j as f64 + rng.random::<f64>()) / strata as f64;
                let r = rng.random::<f64>() < f.phi_raw(u);
                let p = population[rng.random_range(0..population.len())];
                let triple = match p.time {
                    Some(t) if p.has_prior => PriorTriple::tested(t, t <= u),
                    _ => PriorTriple::NONE,
                };
                hits += pt_recent(r, &triple, cutoff) as usize;
            }
            let p = hits as f64 / per as f64;
            (p, p * (1.0 - p) / per as f64)
        })
        .collect();
    let h = cutoff / strata as f64;
    let mc_estimate = h * results.iter().map(|r| r.0).sum::<f64>();
    // each stratum's hit rate estimates the mean of R^PT over that stratum
    let mc_stderr = h * results.iter().map(|r| r.1).sum::<f64>().sqrt();
    Ok(PtMdriOracle {
        mc_estimate,
        mc_stderr,
        formula_value,
        diff: mc_estimate - formula_value,
    })
}

/// Closed-form duration sampler against numeric inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSamplerReport {
    pub max_abs_diff: f64,
    pub ks_statistic: f64,
    pub continuity_gap: f64,
    pub n_shared: usize,
    pub n_draws: usize,
}

/// Inverts the duration CDF at 1 − e by bisection on [0, c_t].
pub fn bisection_duration(params: &EpidemicParams, e: f64) -> Result<f64> {
    let c_t = solve_ct(params)?;
    let target = 1.0 - e;
    let (mut lo, mut hi) = (0.0, c_t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if params.duration_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * c_t.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let e: f64 = rng.random();
        if e > 0.0 {
            return e;
        }
    }
}

pub fn oracle_inverse_sampler(params: &EpidemicParams, n_draws: usize, seed: u64) -> Result<InverseSamplerReport> {
    params.validate()?;
    if n_draws == 0 {
        return Err(Error::domain("need at least one draw"));
    }
    let n_shared = 10_000;
    let mut rng = substream(seed, 0, Purpose::Oracle, 0);
    let mut max_abs_diff = 0.0f64;
    for _ in 0..n_shared {
        let e = open_unit(&mut rng);
        let closed = draw_infection_duration(params, e)?;
        max_abs_diff = max_abs_diff.max((closed - bisection_duration(params, e)?).abs());
    }

    let mut rng = substream(seed, 1, Purpose::Oracle, 0);
    let mut draws = (0..n_draws)
        .map(|_| draw_infection_duration(params, open_unit(&mut rng)))
        .collect::<Result<Vec<f64>>>()?;
    draws.sort_by(f64::total_cmp);
    let n = n_draws as f64;
    let ks_statistic = draws.iter().enumerate().fold(0.0f64, |d, (i, &u)| {
        let cdf = params.duration_cdf(u);
        d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf)
    });

    let es = params.e_star();
    let continuity_gap = if es > 1e-9 && es < 1.0 - 1e-9 {
        (draw_infection_duration(params, es - 1e-9)? - draw_infection_duration(params, es + 1e-9)?).abs()
    } else {
        0.0
    };
    Ok(InverseSamplerReport {
        max_abs_diff,
        ks_statistic,
        continuity_gap,
        n_shared,
        n_draws,
    })
}
