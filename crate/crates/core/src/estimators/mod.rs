//! Standard and enhanced incidence estimators, their analytic variance and
//! confidence intervals, and the shadow period.

pub mod delta;
pub mod moments;
pub mod point;
pub mod record;
mod shadow;

pub use delta::{
    delta_method_variance, lambda_gradient, lambda_of, log_lambda_gradient, w_moments, DeltaVariance, WMoments,
};
pub use moments::{plug_in_moments, PlugInMoments};
pub use point::{enhanced_estimate, enhanced_point, standard_estimate, EnhancedPoint};
pub use record::{pt_recency_indicator, Counts, CrossSectionRecord, PriorTriple, Sample};
pub use shadow::shadow_period;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::assay::{RitaCharacteristics, TestRecentFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Enhanced,
    /// Enhanced estimator after discarding prior tests older than T*.
    EnhancedOnlyRecent,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Enhanced => "enhanced",
            Method::EnhancedOnlyRecent => "enhanced_only_recent",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    /// A lone prior test older than T* was ignored for the variance.
    pub dropped_nonrecent_singleton: bool,
    /// The delta-method quadratic form was negative and set to zero.
    pub variance_clamped: bool,
    /// λ̂ ≤ 0, so the interval is an untransformed Wald interval.
    pub wald_interval: bool,
}

impl Flags {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.dropped_nonrecent_singleton {
            v.push("dropped_nonrecent_singleton");
        }
        if self.variance_clamped {
            v.push("variance_clamped");
        }
        if self.wald_interval {
            v.push("wald_interval");
        }
        v
    }
}

impl Serialize for Flags {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels().serialize(s)
    }
}

/// Point estimate with analytic variance and confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncidenceEstimate {
    pub method: Method,
    pub lambda: f64,
    pub variance: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
    pub n_pos: usize,
    pub n_rec: usize,
    pub n_rec_pt: usize,
    pub flags: Flags,
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Interval on the log scale when λ̂ > 0, otherwise a Wald interval.
pub fn confidence_interval(lambda: f64, variance: f64, level: f64) -> Result<(f64, f64, bool)> {
    let z = normal_quantile(level)?;
    if lambda > 0.0 {
        let sd = (variance / (lambda * lambda)).sqrt();
        Ok((lambda * (-z * sd).exp(), lambda * (z * sd).exp(), false))
    } else {
        let sd = variance.sqrt();
        Ok((lambda - z * sd, lambda + z * sd, true))
    }
}

/// The standard estimator with its analytic variance.
pub fn standard_with_ci(
    sample: &Sample,
    f: &TestRecentFunction,
    chars: &RitaCharacteristics,
    level: f64,
) -> Result<IncidenceEstimate> {
    point::check_cutoffs(f, chars)?;
    let counts = sample.counts(chars.cutoff);
    let lambda = standard_estimate(counts.n_rec, counts.n_pos, counts.n_neg, chars)?;
    let stripped = sample.without_priors();
    let m = plug_in_moments(&stripped, f)?;
    let w = w_moments(&m, chars, counts.n)?;
    let dv = delta_method_variance(&w, counts.n)?;
    let (lo, hi, wald) = confidence_interval(lambda, dv.variance, level)?;
    Ok(IncidenceEstimate {
        method: Method::Standard,
        lambda,
        variance: dv.variance,
        ci_lower: lo,
        ci_upper: hi,
        n: counts.n,
        n_pos: counts.n_pos,
        n_rec: counts.n_rec,
        n_rec_pt: counts.n_rec,
        flags: Flags {
            variance_clamped: dv.clamped,
            wald_interval: wald,
            ..Flags::default()
        },
    })
}

/// Enhanced estimate with its analytic variance and confidence interval.
///
/// When exactly one positive reports a prior test older than T*, that test
/// is ignored for the variance (its group moments are not estimable) and the
/// estimate is flagged.
pub fn estimate_with_ci(
    sample: &Sample,
    f: &TestRecentFunction,
    chars: &RitaCharacteristics,
    level: f64,
) -> Result<IncidenceEstimate> {
    let pt = enhanced_point(sample, f, chars)?;
    let cutoff = chars.cutoff;
    let old: Vec<usize> = sample
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.hiv_positive && r.has_prior && r.prior_time.is_some_and(|t| t > cutoff))
        .map(|(i, _)| i)
        .collect();
    let singleton = old.len() == 1;
    let variance_sample = if singleton {
        let mut records = sample.records().to_vec();
        let r = &mut records[old[0]];
        r.has_prior = false;
        r.prior_time = None;
        r.prior_result = None;
        Sample::with_tau(records, sample.tau())?
    } else {
        sample.clone()
    };

    let m = plug_in_moments(&variance_sample, f)?;
    let w = w_moments(&m, chars, pt.counts.n)?;
    let dv = delta_method_variance(&w, pt.counts.n)?;
    let variance = match dv.log_variance {
        Some(lv) if pt.lambda > 0.0 => pt.lambda * pt.lambda * lv,
        _ => dv.variance,
    };
    let (lo, hi, wald) = confidence_interval(pt.lambda, variance, level)?;
    Ok(IncidenceEstimate {
        method: Method::Enhanced,
        lambda: pt.lambda,
        variance,
        ci_lower: lo,
        ci_upper: hi,
        n: pt.counts.n,
        n_pos: pt.counts.n_pos,
        n_rec: pt.counts.n_rec,
        n_rec_pt: pt.counts.n_rec_pt,
        flags: Flags {
            dropped_nonrecent_singleton: singleton,
            variance_clamped: dv.clamped,
            wald_interval: wald,
        },
    })
}

/// Runs one estimator variant.
pub fn estimate(
    sample: &Sample,
    f: &TestRecentFunction,
    chars: &RitaCharacteristics,
    method: Method,
    level: f64,
) -> Result<IncidenceEstimate> {
    match method {
        Method::Standard => standard_with_ci(sample, f, chars, level),
        Method::Enhanced => estimate_with_ci(sample, f, chars, level),
        Method::EnhancedOnlyRecent => {
            let filtered = sample.only_recent_priors(chars.cutoff);
            let mut e = estimate_with_ci(&filtered, f, chars, level)?;
            e.method = Method::EnhancedOnlyRecent;
            Ok(e)
        }
    }
}
