use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{logistic, TestRecentFunction, DEFAULT_DURATION_FLOOR};
use crate::error::{Error, Result};

/// One external calibration measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    #[serde(rename = "duration_years")]
    pub duration: f64,
    #[serde(with = "crate::io::bool01")]
    pub recent: bool,
}

const MAX_ITER: usize = 100;
const STEP_TOL: f64 = 1e-10;
const MAX_COEF_NORM: f64 = 1e4;

/// Maximum-likelihood logistic fit of `recent` on powers of log duration,
/// using only records below `cutoff`. The covariance is the inverse observed
/// information at the optimum.
pub fn fit_phi(
    records: &[CalibrationRecord],
    degree: usize,
    cutoff: f64,
    frr_tail: f64,
) -> Result<TestRecentFunction> {
    fit_phi_with_floor(records, degree, cutoff, frr_tail, DEFAULT_DURATION_FLOOR)
}

pub fn fit_phi_with_floor(
    records: &[CalibrationRecord],
    degree: usize,
    cutoff: f64,
    frr_tail: f64,
    duration_floor: f64,
) -> Result<TestRecentFunction> {
    if !(cutoff > 0.0) || !(duration_floor > 0.0 && duration_floor < cutoff) {
        return Err(Error::domain("cutoff and duration floor must satisfy 0 < floor < cutoff"));
    }
    for r in records {
        if !(r.duration > 0.0 && r.duration.is_finite()) {
            return Err(Error::domain(format!(
                "calibration durations must be positive, got {}",
                r.duration
            )));
        }
    }
    let used: Vec<&CalibrationRecord> = records.iter().filter(|r| r.duration < cutoff).collect();
    let n = used.len();
    let k = degree + 1;
    if n < degree + 2 {
        return Err(Error::estimation(format!(
            "need at least {} calibration records below the cutoff, found {n}",
            degree + 2
        )));
    }
    let n_recent = used.iter().filter(|r| r.recent).count();
    if n_recent == 0 || n_recent == n {
        return Err(Error::estimation(
            "calibration data below the cutoff contain a single outcome class",
        ));
    }

    let x = DMatrix::from_fn(n, k, |i, j| used[i].duration.max(duration_floor).ln().powi(j as i32));
    let y = DVector::from_iterator(n, used.iter().map(|r| if r.recent { 1.0 } else { 0.0 }));

    let ybar = n_recent as f64 / n as f64;
    let mut theta = DVector::zeros(k);
    theta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = log_likelihood(&x, &y, &theta);
    let mut converged = false;

    for _ in 0..MAX_ITER {
        let eta = &x * &theta;
        let mu = eta.map(logistic);
        let w = mu.map(|m| m * (1.0 - m));
        let info = weighted_gram(&x, &w);
        let score = x.transpose() * (&y - &mu);
        let step = info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::estimation("information matrix is singular; design is degenerate for this degree"))?
            .solve(&score);

        // step halving keeps the likelihood nondecreasing
        let mut scale = 1.0;
        let mut candidate = &theta + &step;
        let mut cand_ll = log_likelihood(&x, &y, &candidate);
        while cand_ll < ll - 1e-12 * ll.abs().max(1.0) && scale > 1e-6 {
            scale *= 0.5;
            candidate = &theta + &step * scale;
            cand_ll = log_likelihood(&x, &y, &candidate);
        }
        let moved = (&step * scale).amax();
        theta = candidate;
        ll = cand_ll;
        if theta.norm() > MAX_COEF_NORM {
            break;
        }
        if moved < STEP_TOL * (1.0 + theta.amax()) {
            converged = true;
            break;
        }
    }

    let eta = &x * &theta;
    let max_fit_gap = eta
        .iter()
        .zip(y.iter())
        .map(|(&e, &yi)| (logistic(e) - yi).abs())
        .fold(0.0, f64::max);
    if !converged || theta.norm() > MAX_COEF_NORM || max_fit_gap < 1e-6 {
        return Err(Error::estimation(format!(
            "logistic fit did not converge (coefficient norm {:.3e}, largest residual {:.3e}); \
             the outcomes are likely separated by duration",
            theta.norm(),
            max_fit_gap
        )));
    }

    let w = eta.map(|e| {
        let m = logistic(e);
        m * (1.0 - m)
    });
    let cov = weighted_gram(&x, &w)
        .try_inverse()
        .ok_or_else(|| Error::estimation("information matrix is singular at the optimum"))?;
    let cov = (&cov + cov.transpose()) * 0.5;

    TestRecentFunction::new(degree, theta.iter().copied().collect(), cov, frr_tail, cutoff, duration_floor)
}

fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    x.transpose() * xw
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    let eta = x * theta;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| {
            // log(1 + exp(e)) computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            yi * e - softplus
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(duration: f64, recent: bool) -> CalibrationRecord {
        CalibrationRecord { duration, recent }
    }

    #[test]
    fn intercept_only_recovers_proportion() {
        let data: Vec<_> = (0..200).map(|i| rec(0.01 + i as f64 * 0.009, i % 5 < 2)).collect();
        let f = fit_phi(&data, 0, 2.0, 0.01).unwrap();
        for u in [0.05, 0.7, 1.99] {
            assert!((f.phi(u).unwrap() - 0.4).abs() < 1e-8);
        }
        // binomial variance of the logit: 1/(n p (1-p))
        let expect = 1.0 / (200.0 * 0.4 * 0.6);
        assert!((f.covariance()[(0, 0)] - expect).abs() < 1e-8);
    }

    #[test]
    fn separated_data_is_rejected() {
        let data: Vec<_> = (1..=80).map(|i| {
            let u = i as f64 * 0.02;
            rec(u, u < 0.25)
        }).collect();
        let err = fit_phi(&data, 2, 2.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::Estimation(_)), "{err}");
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<_> = (1..50).map(|i| rec(i as f64 * 0.03, false)).collect();
        assert!(matches!(fit_phi(&data, 1, 2.0, 0.0), Err(Error::Estimation(_))));
        // records at or beyond the cutoff are ignored
        let mut data = data;
        data.push(rec(2.5, true));
        assert!(matches!(fit_phi(&data, 1, 2.0, 0.0), Err(Error::Estimation(_))));
    }

    #[test]
    fn too_few_records() {
        let data = vec![rec(0.1, true), rec(0.5, false), rec(1.0, false)];
        assert!(fit_phi(&data, 2, 2.0, 0.0).is_err());
        assert!(fit_phi(&[rec(-1.0, true)], 0, 2.0, 0.0).is_err());
    }
}
