use rand::Rng;

use super::epidemic::{draw_infection_duration, solve_ct, EpidemicParams};
use super::testing::{apply_recall_bias, PriorTestingSpec, RecallBiasSpec};
use crate::assay::CalibrationRecord;
use crate::assay::TestRecentFunction;
use crate::error::{Error, Result};
use crate::estimators::{CrossSectionRecord, Sample};
use crate::rng::{substream, Purpose};

/// Bernoulli(φ(u)) assay outcome.
pub fn draw_recency_result<R: Rng + ?Sized>(f: &TestRecentFunction, u: f64, rng: &mut R) -> Result<bool> {
    let p = f.phi(u)?;
    Ok(rng.random::<f64>() < p)
}

/// Everything needed to generate one cross-sectional survey.
#[derive(Debug, Clone, Copy)]
pub struct CrossSectionDesign<'a> {
    pub params: &'a EpidemicParams,
    pub f: &'a TestRecentFunction,
    pub testing: &'a PriorTestingSpec,
    pub bias: Option<&'a RecallBiasSpec>,
}

pub fn simulate_cross_section(
    n: usize,
    params: &EpidemicParams,
    f: &TestRecentFunction,
    testing: &PriorTestingSpec,
    bias: Option<&RecallBiasSpec>,
    seed: u64,
) -> Result<Sample> {
    let design = CrossSectionDesign { params, f, testing, bias };
    simulate_replicate(&design, n, seed, 0)
}

/// One replicate; individual i draws from its own substream.
pub fn simulate_replicate(design: &CrossSectionDesign<'_>, n: usize, seed: u64, replicate: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let params = design.params;
    params.validate()?;
    design.testing.validate()?;
    if let Some(b) = design.bias {
        b.validate()?;
    }
    let c_t = solve_ct(params)?;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(seed, replicate, Purpose::CrossSection, i as u64);
        if rng.random::<f64>() >= params.prevalence {
            records.push(CrossSectionRecord::negative());
            continue;
        }
        // 1 − U keeps the variate inside (0, 1)
        let e = 1.0 - rng.random::<f64>();
        let e = if e >= 1.0 { 1.0 - f64::EPSILON } else { e };
        let u = draw_infection_duration(params, e)?;
        let recent = draw_recency_result(design.f, u, &mut rng)?;
        let mut prior = design.testing.draw(u, &mut rng);
        if let Some(b) = design.bias {
            prior = apply_recall_bias(prior, b, &mut rng);
        }
        records.push(CrossSectionRecord::positive(recent, prior));
    }
    let jitter = design.bias.is_some_and(|b| b.time_jitter_sd > 0.0);
    let tau = if jitter { f64::INFINITY } else { design.testing.support(c_t).max(params.cutoff) };
    Sample::with_tau(records, tau)
}

/// Midpoints of `k` equal bins over (0, cutoff].
pub fn default_visit_grid(cutoff: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|j| (j as f64 - 0.5) * cutoff / k as f64).collect()
}

pub fn simulate_calibration_dataset(
    true_f: &TestRecentFunction,
    n_subjects: usize,
    visit_grid: &[f64],
    seed: u64,
) -> Result<Vec<CalibrationRecord>> {
    calibration_replicate(true_f, n_subjects, visit_grid, seed, 0)
}

/// Each subject is observed once at every grid duration.
pub fn calibration_replicate(
    true_f: &TestRecentFunction,
    n_subjects: usize,
    visit_grid: &[f64],
    seed: u64,
    replicate: u64,
) -> Result<Vec<CalibrationRecord>> {
    if visit_grid.is_empty() {
        return Err(Error::domain("visit grid is empty"));
    }
    if let Some(&u) = visit_grid.iter().find(|&&u| !(u > 0.0 && u <= true_f.cutoff())) {
        return Err(Error::domain(format!("visit duration {u} outside (0, cutoff]")));
    }
    let probs = visit_grid.iter().map(|&u| true_f.phi(u)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(n_subjects * visit_grid.len());
    for s in 0..n_subjects {
        let mut rng = substream(seed, replicate, Purpose::Calibration, s as u64);
        for (&u, &p) in visit_grid.iter().zip(&probs) {
            out.push(CalibrationRecord {
                duration: u,
                recent: rng.random::<f64>() < p,
            });
        }
    }
    Ok(out)
}
