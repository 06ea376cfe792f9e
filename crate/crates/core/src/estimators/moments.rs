use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::record::Sample;
use crate::assay::TestRecentFunction;
use crate::error::{Error, Result};

/// Empirical moments substituted into the analytic variance.
///
/// The A-group holds positives with a prior test at most T* ago, the
/// B-group those with a prior test more than T* ago. A test exactly T* ago
/// is counted in the A-group only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlugInMoments {
    pub p: f64,
    pub p_rec: f64,
    pub p_rec_pt: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub mu_ta: f64,
    pub sigma2_ta: f64,
    pub mu_tb: f64,
    pub sigma2_tb: f64,
    pub omega_ta: f64,
    pub sigma2_omega_ta: f64,
    pub omega_star_ta: f64,
    pub r_ta: f64,
    pub r_prime_ta: f64,
    pub r_star_ta: f64,
    pub n_a: usize,
    pub n_b: usize,
}

pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

pub fn plug_in_moments(sample: &Sample, f: &TestRecentFunction) -> Result<PlugInMoments> {
    let cutoff = f.cutoff();
    let counts = sample.counts(cutoff);
    if counts.n_pos == 0 {
        return Err(Error::estimation("no HIV-positive records; moments are undefined"));
    }
    let n_pos = counts.n_pos as f64;

    let mut t_a = Vec::new();
    let mut t_b = Vec::new();
    for r in sample.positives() {
        if let (true, Some(t)) = (r.has_prior, r.prior_time) {
            if t <= cutoff {
                t_a.push(t);
            } else {
                t_b.push(t);
            }
        }
    }

    let (mu_ta, sigma2_ta) = mean_and_variance(&t_a);
    let (mu_tb, sigma2_tb) = mean_and_variance(&t_b);

    let residuals = f.residual_integrals(&t_a)?;
    let omegas: Vec<f64> = t_a.iter().zip(&residuals).map(|(t, r)| t - r).collect();
    let (omega_ta, sigma2_omega_ta) = mean_and_variance(&omegas);
    let omega_star_ta = if t_a.is_empty() {
        0.0
    } else {
        t_a.iter().zip(&omegas).map(|(t, w)| t * w).sum::<f64>() / t_a.len() as f64
    };

    let (r_ta, r_prime_ta, r_star_ta) = r_moments(f, &t_a)?;

    Ok(PlugInMoments {
        p: n_pos / counts.n as f64,
        p_rec: counts.n_rec as f64 / n_pos,
        p_rec_pt: counts.n_rec_pt as f64 / n_pos,
        p_a: t_a.len() as f64 / n_pos,
        p_b: t_b.len() as f64 / n_pos,
        mu_ta,
        sigma2_ta,
        mu_tb,
        sigma2_tb,
        omega_ta,
        sigma2_omega_ta,
        omega_star_ta,
        r_ta,
        r_prime_ta,
        r_star_ta,
        n_a: t_a.len(),
        n_b: t_b.len(),
    })
}

// r_{t,s} = G(t)ᵀ Σ G(s), so the mean over distinct ordered pairs follows
// from the sum of integrated gradients in linear time.
fn r_moments(f: &TestRecentFunction, t_a: &[f64]) -> Result<(f64, f64, f64)> {
    let n = t_a.len();
    if n == 0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let g_star = f.integrated_gradient(f.cutoff())?;
    let mut sum_g = DVector::zeros(f.degree() + 1);
    let mut diag = 0.0;
    let mut star = 0.0;
    for &t in t_a {
        let g = f.integrated_gradient(t)?;
        diag += f.quadratic(&g, &g);
        star += f.quadratic(&g, &g_star);
        sum_g += g;
    }
    let nf = n as f64;
    let r_ta = diag / nf;
    let r_prime = if n >= 2 {
        (f.quadratic(&sum_g, &sum_g) - diag) / (nf * (nf - 1.0))
    } else {
        // no distinct pairs; the single diagonal term is the only information
        r_ta
    };
    Ok((r_ta, r_prime, star / nf))
}
