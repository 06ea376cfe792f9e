use nalgebra::{Matrix5, Vector5};

use super::moments::PlugInMoments;
use crate::assay::RitaCharacteristics;
use crate::error::{Error, Result};

/// Means and covariance of (W₁, …, W₅), where
/// λ̂ = W₁ / ((N − W₂)(W₃ + (W₄ + W₅)/W₂)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WMoments {
    pub means: Vector5<f64>,
    pub covariance: Matrix5<f64>,
}

/// Analytic means and covariances of the W statistics from plug-in moments.
pub fn w_moments(m: &PlugInMoments, chars: &RitaCharacteristics, n: usize) -> Result<WMoments> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let nf = n as f64;
    let p = m.p;
    let np = nf * p;
    let beta = chars.frr;
    let s2b = chars.frr_variance;
    let t_star = chars.cutoff;
    let w3m = chars.mdri - beta * t_star;
    if !(w3m > 0.0) {
        return Err(Error::estimation(format!(
            "mdri - frr * cutoff = {w3m:e} must be positive"
        )));
    }
    let (pa, pb) = (m.p_a, m.p_b);
    let (p_rec, p_pt) = (m.p_rec, m.p_rec_pt);
    let (mu_a, mu_b) = (m.mu_ta, m.mu_tb);
    let d_a = mu_a - m.omega_ta;
    // λ(1 − p)/p written through the recency probability
    let k = (p_rec - beta) / w3m;
    let second_a = mu_a * mu_a + m.sigma2_ta + m.omega_ta * m.omega_ta + m.sigma2_omega_ta
        - 2.0 * m.omega_star_ta;

    let e1 = np * (p_pt - beta * (1.0 - pb));
    let e2 = np;
    let e3 = w3m;
    let e4 = np * pa * d_a;
    let e5 = np * beta * pb * mu_b;

    let excess = p_pt - (1.0 - pb) * beta;
    let v1 = np
        * (p_pt * (1.0 - p_pt)
            + (1.0 - p) * excess * excess
            + s2b * (1.0 - pb) * (1.0 - (1.0 - pb) * p + np * (1.0 - pb))
            + beta * pb * (beta * (1.0 - pb) - 2.0 * (p_pt - (p_rec - beta) * (1.0 + mu_b * beta / w3m))));
    let v2 = np * (1.0 - p);
    let v3 = chars.mdri_variance + s2b * t_star * t_star;
    let v4 = np
        * pa
        * (m.sigma2_ta + m.sigma2_omega_ta + mu_a * mu_a + m.omega_ta * m.omega_ta
            - p * pa * d_a * d_a
            + m.r_ta
            + pa * m.r_prime_ta * (np - p)
            - 2.0 * m.omega_star_ta);
    let v5 = np
        * pb
        * (s2b * mu_b * mu_b * pb * np + (s2b + beta * beta) * (m.sigma2_tb + mu_b * mu_b * (1.0 - pb * p)));

    let c12 = np * (1.0 - p) * excess;
    let c13 = np * t_star * s2b * (1.0 - pb);
    let c14 = np * pa * (d_a * (p_rec - p * p_pt - beta * (1.0 - p + p * pb)) + k * second_a);
    let c15 = np
        * pb
        * (beta * ((p_rec - beta) * (mu_b + (m.sigma2_tb + mu_b * mu_b) * beta / w3m) - p * p_pt * mu_b)
            + p * (s2b + beta * beta) * mu_b * (1.0 - pb)
            - s2b * np * (1.0 - pb) * mu_b);
    let c23 = 0.0;
    let c24 = np * (1.0 - p) * pa * d_a;
    let c25 = np * (1.0 - p) * beta * pb * mu_b;
    let c34 = -np * pa * m.r_star_ta;
    let c35 = -np * t_star * pb * mu_b * s2b;
    let c45 = -nf * p * p * beta * pb * pa * mu_b * d_a;

    #[rustfmt::skip]
    let covariance = Matrix5::new(
        v1,  c12, c13, c14, c15,
        c12, v2,  c23, c24, c25,
        c13, c23, v3,  c34, c35,
        c14, c24, c34, v4,  c45,
        c15, c25, c35, c45, v5,
    );
    Ok(WMoments {
        means: Vector5::new(e1, e2, e3, e4, e5),
        covariance,
    })
}

/// λ as a function of the W statistics.
pub fn lambda_of(w: &Vector5<f64>, n: usize) -> f64 {
    let h = w[2] + (w[3] + w[4]) / w[1];
    w[0] / ((n as f64 - w[1]) * h)
}

fn check_denominator(w: &Vector5<f64>, n: usize) -> Result<f64> {
    let nf = n as f64;
    if !(w[1] > 0.0 && w[1] < nf) {
        return Err(Error::estimation(format!(
            "E W2 = {} must lie strictly between 0 and N = {n}",
            w[1]
        )));
    }
    let h = w[2] + (w[3] + w[4]) / w[1];
    if !(h > 0.0) {
        return Err(Error::estimation(format!(
            "E W3 + (E W4 + E W5)/E W2 = {h:e} must be positive"
        )));
    }
    Ok(h)
}

/// Gradient of log λ in the five W means.
pub fn log_lambda_gradient(w: &Vector5<f64>, n: usize) -> Result<Vector5<f64>> {
    if !(w[0] > 0.0) {
        return Err(Error::estimation(format!("E W1 = {} must be positive", w[0])));
    }
    let h = check_denominator(w, n)?;
    let nf = n as f64;
    let d = (w[3] + w[4]) / w[1];
    let g45 = -1.0 / (w[1] * h);
    Ok(Vector5::new(
        1.0 / w[0],
        1.0 / (nf - w[1]) + d / (w[2] * w[1] + w[3] + w[4]),
        -1.0 / h,
        g45,
        g45,
    ))
}

/// Gradient of λ itself; defined whenever the denominator is positive.
pub fn lambda_gradient(w: &Vector5<f64>, n: usize) -> Result<Vector5<f64>> {
    let h = check_denominator(w, n)?;
    let nf = n as f64;
    let lambda = lambda_of(w, n);
    let d = (w[3] + w[4]) / w[1];
    let g45 = -lambda / (w[1] * h);
    Ok(Vector5::new(
        1.0 / ((nf - w[1]) * h),
        lambda * (1.0 / (nf - w[1]) + d / (w[1] * h)),
        -lambda / h,
        g45,
        g45,
    ))
}

/// Delta-method variance of λ̂ evaluated at the W means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaVariance {
    /// Var(λ̂), clamped at zero.
    pub variance: f64,
    /// Var(log λ̂) when λ > 0.
    pub log_variance: Option<f64>,
    /// Set when the quadratic form came out negative and was clamped.
    pub clamped: bool,
}

pub fn delta_method_variance(w: &WMoments, n: usize) -> Result<DeltaVariance> {
    let grad = lambda_gradient(&w.means, n)?;
    let raw = (grad.transpose() * w.covariance * grad)[(0, 0)];
    let clamped = raw < 0.0;
    let variance = raw.max(0.0);
    let lambda = lambda_of(&w.means, n);
    let log_variance = (lambda > 0.0).then(|| variance / (lambda * lambda));
    Ok(DeltaVariance {
        variance,
        log_variance,
        clamped,
    })
}
