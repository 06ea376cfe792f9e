use crate::assay::{PriorTest, RitaCharacteristics, TestRecentFunction};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, SIMPSON_TOLERANCE};

use super::point::check_cutoffs;

/// Mean shadow period ω* of the enhanced estimator, in years.
///
/// Expectations over prior tests are empirical means over `prior_tests`.
/// The u-integrals of each record are accumulated over the sorted test
/// times, which equals integrating the node-wise empirical mean.
pub fn shadow_period(f: &TestRecentFunction, chars: &RitaCharacteristics, prior_tests: &[PriorTest]) -> Result<f64> {
    check_cutoffs(f, chars)?;
    let cutoff = chars.cutoff;
    let beta = chars.frr;

    let mut a_times = Vec::new();
    let mut b_sum = 0.0;
    let mut b_sq_half = 0.0;
    for (i, p) in prior_tests.iter().enumerate() {
        match (p.has_prior, p.time) {
            (true, Some(t)) if t >= 0.0 && t.is_finite() => {
                if t <= cutoff {
                    a_times.push(t);
                }
                if t >= cutoff {
                    b_sum += t;
                    b_sq_half += 0.5 * t * t;
                }
            }
            (false, None) => {}
            _ => return Err(Error::domain(format!("prior test {} is malformed", i + 1))),
        }
    }
    let n = prior_tests.len().max(1) as f64;

    a_times.sort_by(f64::total_cmp);
    let residuals = f.residual_integrals(&a_times)?;
    let mut weighted = 0.0;
    let mut acc = 0.0;
    let mut last = 0.0;
    for &t in &a_times {
        if t > last {
            acc += first_moment_of_phi(f, last, t);
            last = t;
        }
        // ∫₀ᵗ u(1 − φ(u)) du
        weighted += 0.5 * t * t - acc;
    }
    let a_resid: f64 = residuals.iter().sum();

    let numerator = first_moment_of_phi(f, 0.0, cutoff) - beta * 0.5 * cutoff * cutoff
        + weighted / n
        + beta * b_sq_half / n;
    let denominator = chars.mdri - beta * cutoff + a_resid / n + beta * b_sum / n;
    if !(denominator.abs() > 0.0) {
        return Err(Error::estimation("shadow period denominator is zero"));
    }
    Ok(numerator / denominator)
}

// ∫ₛᵗ u φ(u) du on [0, cutoff]
fn first_moment_of_phi(f: &TestRecentFunction, s: f64, t: f64) -> f64 {
    let floor = f.duration_floor();
    let mut total = 0.0;
    if s < floor {
        let hi = t.min(floor);
        total += f.phi_inner(floor) * 0.5 * (hi * hi - s * s);
    }
    let lo = s.max(floor);
    if t > lo {
        total += adaptive_simpson(
            |x| {
                let u = x.exp();
                f.phi_inner(u) * u * u
            },
            lo.ln(),
            t.ln(),
            SIMPSON_TOLERANCE,
        );
    }
    total
}
