//! Synthetic cross-sectional surveys and calibration data.

pub mod cross_section;
pub mod epidemic;
pub mod testing;

use serde::{Deserialize, Serialize};

use crate::assay::{TestRecentFunction, DAY, DEFAULT_DURATION_FLOOR};
use crate::error::{Error, Result};

pub use cross_section::{
    calibration_replicate, default_visit_grid, draw_recency_result, simulate_calibration_dataset,
    simulate_cross_section, simulate_replicate, CrossSectionDesign,
};
pub use epidemic::{draw_infection_duration, solve_ct, EpidemicParams};
pub use testing::{
    apply_recall_bias, draw_prior_test_infection_driven, draw_prior_test_uniform, GeneralizedGamma,
    PriorTestingSpec, RecallBiasSpec,
};

/// Ground-truth test-recent curve: logistic in log duration with the given
/// slope, intercept chosen so that the MDRI equals `mdri_days`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueAssay {
    pub mdri_days: f64,
    pub frr: f64,
    pub log_slope: f64,
    pub cutoff: f64,
}

impl Default for TrueAssay {
    fn default() -> Self {
        TrueAssay {
            mdri_days: 98.0,
            frr: 0.014,
            log_slope: -3.0,
            cutoff: 2.0,
        }
    }
}

impl TrueAssay {
    pub fn phi(&self) -> Result<TestRecentFunction> {
        if !(self.log_slope < 0.0) {
            return Err(Error::domain("true assay slope must be negative"));
        }
        let target = self.mdri_days * DAY;
        if !(target > 0.0 && target < self.cutoff) {
            return Err(Error::domain("true MDRI must lie in (0, cutoff)"));
        }
        let build = |theta0: f64| {
            TestRecentFunction::new(
                1,
                vec![theta0, self.log_slope],
                nalgebra::DMatrix::zeros(2, 2),
                self.frr,
                self.cutoff,
                DEFAULT_DURATION_FLOOR,
            )
        };
        // MDRI increases with the intercept
        let (mut lo, mut hi) = (-60.0, 60.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if build(mid)?.mdri() < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        build(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_assay_hits_target() {
        let f = TrueAssay::default().phi().unwrap();
        assert!((f.mdri() * 365.25 - 98.0).abs() < 1e-6);
        assert!((f.coefficients()[0] + 4.501261252938492).abs() < 1e-6);
    }
}
