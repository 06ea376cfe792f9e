use rand::Rng;

use super::TestRecentFunction;
use crate::error::{Error, Result};
use crate::estimators::record::{pt_recent, PriorTriple};
use crate::rng::{substream, Purpose, StreamRng};

/// Prior-test availability and timing (Q, T) for one positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTest {
    pub has_prior: bool,
    pub time: Option<f64>,
}

impl From<&PriorTriple> for PriorTest {
    fn from(p: &PriorTriple) -> Self {
        PriorTest {
            has_prior: p.has_prior,
            time: p.time,
        }
    }
}

/// MDRI of the PT-RITA: Ω_{T*} + mean of Q·1(T ≤ T*)·∫₀ᵀ(1 − φ).
pub fn pt_mdri(f: &TestRecentFunction, prior_tests: &[PriorTest]) -> Result<f64> {
    let cutoff = f.cutoff();
    let mut times = Vec::new();
    for (i, p) in prior_tests.iter().enumerate() {
        match (p.has_prior, p.time) {
            (true, Some(t)) if t >= 0.0 && t.is_finite() => {
                if t <= cutoff {
                    times.push(t);
                }
            }
            (true, _) => {
                return Err(Error::domain(format!(
                    "prior test {} has a missing or negative time",
                    i + 1
                )))
            }
            (false, Some(_)) => {
                return Err(Error::domain(format!(
                    "prior test {} has a time without a test",
                    i + 1
                )))
            }
            (false, None) => {}
        }
    }
    let mdri = f.mdri();
    if prior_tests.is_empty() {
        return Ok(mdri);
    }
    let extra: f64 = f.residual_integrals(&times)?.iter().sum();
    Ok(mdri + extra / prior_tests.len() as f64)
}

/// Monte Carlo estimate of the PT-RITA false recent rate with its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrrMonteCarlo {
    pub beta_pt: f64,
    pub mc_stderr: f64,
}

/// Estimates Pr(R^PT = 1 | U > T*) by drawing a non-recent duration, the
/// assay result at the tail rate and a prior test given the duration.
pub fn pt_frr_mc<D, S>(
    f: &TestRecentFunction,
    mut duration_sampler: D,
    mut testing_sampler: S,
    n_draws: usize,
    rng_seed: u64,
) -> Result<FrrMonteCarlo>
where
    D: FnMut(&mut StreamRng) -> f64,
    S: FnMut(f64, &mut StreamRng) -> PriorTriple,
{
    if n_draws < 1000 {
        return Err(Error::domain("pt_frr_mc needs at least 1000 draws"));
    }
    let cutoff = f.cutoff();
    let beta = f.frr_tail();
    let mut rng = substream(rng_seed, 0, Purpose::Oracle, 0);
    let mut hits = 0usize;
    for _ in 0..n_draws {
        let u = duration_sampler(&mut rng);
        if !(u > cutoff) {
            return Err(Error::domain(format!(
                "duration sampler returned {u}, which is not beyond the cutoff {cutoff}"
            )));
        }
        let r = beta > 0.0 && rng.random::<f64>() < beta;
        let prior = testing_sampler(u, &mut rng);
        if pt_recent(r, &prior, cutoff) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_draws as f64;
    Ok(FrrMonteCarlo {
        beta_pt: p,
        mc_stderr: (p * (1.0 - p) / n_draws as f64).sqrt(),
    })
}
