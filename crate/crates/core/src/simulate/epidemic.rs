use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Incidence λ at the survey, prevalence p and the slope ρ of incidence
/// before T*: λ(u) = λ + ρ(u − T*)⁺ at infection duration u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub lambda: f64,
    pub prevalence: f64,
    #[serde(default)]
    pub rho: f64,
    pub cutoff: f64,
    #[serde(default)]
    pub t_cs: f64,
}

impl EpidemicParams {
    pub fn constant(lambda: f64, prevalence: f64, cutoff: f64) -> Self {
        EpidemicParams {
            lambda,
            prevalence,
            rho: 0.0,
            cutoff,
            t_cs: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain("incidence must be positive"));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::domain("prevalence must lie in (0, 1)"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::domain("incidence slope must be nonnegative"));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::domain("cutoff must be positive"));
        }
        Ok(())
    }

    fn odds(&self) -> f64 {
        self.prevalence / (1.0 - self.prevalence)
    }

    /// Threshold e* = 1 − λT*(1 − p)/p between the two sampler branches.
    pub fn e_star(&self) -> f64 {
        1.0 - self.lambda * self.cutoff / self.odds()
    }

    /// Cumulative infection-duration distribution on [0, c_t].
    pub fn duration_cdf(&self, u: f64) -> f64 {
        let excess = (u - self.cutoff).max(0.0);
        ((self.lambda * u + 0.5 * self.rho * excess * excess) / self.odds()).clamp(0.0, 1.0)
    }
}

/// Maximal infection duration c_t, the root of λc + (ρ/2)(c − T*)² = p/(1 − p).
pub fn solve_ct(params: &EpidemicParams) -> Result<f64> {
    params.validate()?;
    let k = params.odds();
    let lambda = params.lambda;
    if params.rho == 0.0 {
        return Ok(k / lambda);
    }
    let y = k - lambda * params.cutoff;
    if y <= 0.0 {
        // the whole mass sits inside the constant stretch
        return Ok(k / lambda);
    }
    let x = 2.0 * y / (lambda + (lambda * lambda + 2.0 * params.rho * y).sqrt());
    if !(x >= 0.0) {
        return Err(Error::domain("no positive root for the maximal infection duration"));
    }
    Ok(params.cutoff + x)
}

/// Infection duration for a uniform variate `e`; decreasing in `e`.
pub fn draw_infection_duration(params: &EpidemicParams, e: f64) -> Result<f64> {
    params.validate()?;
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::domain(format!("uniform variate must lie in (0, 1), got {e}")));
    }
    let k = params.odds();
    let lambda = params.lambda;
    if params.rho == 0.0 || e >= params.e_star() {
        return Ok((1.0 - e) * k / lambda);
    }
    let y = (1.0 - e) * k - lambda * params.cutoff;
    let disc = lambda * lambda + 2.0 * params.rho * y;
    if disc < 0.0 {
        return Err(Error::domain("negative discriminant in the duration sampler"));
    }
    Ok(params.cutoff + 2.0 * y / (disc.sqrt() + lambda))
}
