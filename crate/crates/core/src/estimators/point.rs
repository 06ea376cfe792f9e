use nalgebra::Vector5;

use super::record::{Counts, Sample};
use crate::assay::{RitaCharacteristics, TestRecentFunction};
use crate::error::{Error, Result};

/// Adjusted ratio estimator from recency-assay counts alone.
pub fn standard_estimate(n_rec: usize, n_pos: usize, n_neg: usize, chars: &RitaCharacteristics) -> Result<f64> {
    let beta = chars.frr;
    let w3 = chars.mdri - beta * chars.cutoff;
    let denom = n_neg as f64 * w3;
    if !(denom > 0.0) {
        return Err(Error::estimation(format!(
            "standard estimator denominator N_neg * (mdri - frr * cutoff) = {denom:e} is not positive"
        )));
    }
    Ok((n_rec as f64 - n_pos as f64 * beta) / denom)
}

/// Enhanced point estimate with the W statistics it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancedPoint {
    pub lambda: f64,
    pub w: Vector5<f64>,
    pub counts: Counts,
}

pub(crate) fn check_cutoffs(f: &TestRecentFunction, chars: &RitaCharacteristics) -> Result<()> {
    if (f.cutoff() - chars.cutoff).abs() > 1e-12 * chars.cutoff {
        return Err(Error::domain(format!(
            "test-recent function cutoff {} differs from characteristics cutoff {}",
            f.cutoff(),
            chars.cutoff
        )));
    }
    Ok(())
}

pub fn enhanced_point(sample: &Sample, f: &TestRecentFunction, chars: &RitaCharacteristics) -> Result<EnhancedPoint> {
    check_cutoffs(f, chars)?;
    let cutoff = chars.cutoff;
    let beta = chars.frr;
    let counts = sample.counts(cutoff);

    let mut a_times = Vec::new();
    let mut n_b = 0usize;
    let mut b_time_sum = 0.0;
    for r in sample.positives() {
        if let (true, Some(t)) = (r.has_prior, r.prior_time) {
            if t <= cutoff {
                a_times.push(t);
            }
            if t >= cutoff {
                n_b += 1;
                b_time_sum += t;
            }
        }
    }
    let w4: f64 = f.residual_integrals(&a_times)?.iter().sum();
    let w = Vector5::new(
        counts.n_rec_pt as f64 - beta * (counts.n_pos - n_b) as f64,
        counts.n_pos as f64,
        chars.mdri - beta * cutoff,
        w4,
        beta * b_time_sum,
    );
    let adjust = if counts.n_pos > 0 { (w[3] + w[4]) / w[1] } else { 0.0 };
    let mean_window = w[2] + adjust;
    let denom = counts.n_neg as f64 * mean_window;
    if !(denom > 0.0) {
        return Err(Error::estimation(format!(
            "enhanced estimator denominator is not positive: N_neg = {}, effective window = {mean_window:e}",
            counts.n_neg
        )));
    }
    Ok(EnhancedPoint {
        lambda: w[0] / denom,
        w,
        counts,
    })
}

/// Enhanced incidence point estimate.
pub fn enhanced_estimate(sample: &Sample, f: &TestRecentFunction, chars: &RitaCharacteristics) -> Result<f64> {
    enhanced_point(sample, f, chars).map(|p| p.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::record::{CrossSectionRecord, PriorTriple};

    #[test]
    fn standard_hand_values() {
        let c = RitaCharacteristics::new(0.25, 0.0, 0.0, 0.0, 2.0).unwrap();
        let v = standard_estimate(10, 100, 900, &c).unwrap();
        assert!((v - 10.0 / 225.0).abs() < 1e-15);
        let c = RitaCharacteristics::new(0.25, 0.0, 0.02, 0.0, 2.0).unwrap();
        assert_eq!(standard_estimate(2, 100, 900, &c).unwrap(), 0.0);
        assert!(standard_estimate(2, 100, 0, &c).is_err());
    }

    #[test]
    fn enhanced_rejects_mismatched_cutoff() {
        let f = TestRecentFunction::constant(0.5, 0.0, 1.0).unwrap();
        let c = RitaCharacteristics::new(0.5, 0.0, 0.0, 0.0, 2.0).unwrap();
        let s = Sample::new(vec![CrossSectionRecord::negative()]).unwrap();
        assert!(enhanced_estimate(&s, &f, &c).is_err());
    }

    #[test]
    fn adding_an_rstar_case_raises_numerator_by_one() {
        let f = TestRecentFunction::constant(0.5, 0.01, 2.0).unwrap();
        let c = RitaCharacteristics::new(1.0, 0.0, 0.01, 0.0, 2.0).unwrap();
        let mut recs = vec![CrossSectionRecord::negative(); 50];
        recs.push(CrossSectionRecord::positive(true, PriorTriple::NONE));
        recs.push(CrossSectionRecord::positive(false, PriorTriple::tested(3.0, true)));
        let before = enhanced_point(&Sample::new(recs.clone()).unwrap(), &f, &c).unwrap();
        recs.push(CrossSectionRecord::positive(false, PriorTriple::tested(0.7, false)));
        let after = enhanced_point(&Sample::new(recs).unwrap(), &f, &c).unwrap();
        assert_eq!(after.counts.n_rec_pt, before.counts.n_rec_pt + 1);
        assert!(after.w[0] > before.w[0]);
        assert!(after.w[3] >= before.w[3]);
    }
}
