use crate::error::{Error, Result};

/// A prior HIV test as reported by an HIV-positive respondent: availability
/// Q, elapsed time T (years) and result Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTriple {
    pub has_prior: bool,
    pub time: Option<f64>,
    pub result: Option<bool>,
}

impl PriorTriple {
    pub const NONE: PriorTriple = PriorTriple {
        has_prior: false,
        time: None,
        result: None,
    };

    pub fn tested(time: f64, positive: bool) -> Self {
        PriorTriple {
            has_prior: true,
            time: Some(time),
            result: Some(positive),
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.has_prior, self.time, self.result) {
            (false, None, None) => Ok(()),
            (false, _, _) => Err(Error::domain("prior time/result given without a prior test")),
            (true, Some(t), Some(_)) if t >= 0.0 && t.is_finite() => Ok(()),
            (true, Some(t), Some(_)) => Err(Error::domain(format!("prior test time must be nonnegative, got {t}"))),
            (true, _, _) => Err(Error::domain("a prior test needs both a time and a result")),
        }
    }
}

/// PT-RITA recency: R(1 − BΔ) + (1 − R)A(1 − Δ) with A = Q·1(T ≤ T*) and
/// B = Q·1(T ≥ T*).
pub fn pt_recency_indicator(
    r: bool,
    q: bool,
    t: Option<f64>,
    delta: Option<bool>,
    cutoff: f64,
) -> Result<bool> {
    let prior = PriorTriple {
        has_prior: q,
        time: t,
        result: delta,
    };
    prior.validate()?;
    Ok(pt_recent(r, &prior, cutoff))
}

pub(crate) fn pt_recent(r: bool, prior: &PriorTriple, cutoff: f64) -> bool {
    match (prior.has_prior, prior.time, prior.result) {
        (true, Some(t), Some(delta)) => {
            if r {
                !(t >= cutoff && delta)
            } else {
                t <= cutoff && !delta
            }
        }
        _ => r,
    }
}

/// One individual in the cross-sectional survey.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionRecord {
    pub id: Option<String>,
    pub hiv_positive: bool,
    pub rita_recent: Option<bool>,
    pub has_prior: bool,
    pub prior_time: Option<f64>,
    pub prior_result: Option<bool>,
}

impl CrossSectionRecord {
    pub fn negative() -> Self {
        CrossSectionRecord {
            id: None,
            hiv_positive: false,
            rita_recent: None,
            has_prior: false,
            prior_time: None,
            prior_result: None,
        }
    }

    pub fn positive(recent: bool, prior: PriorTriple) -> Self {
        CrossSectionRecord {
            id: None,
            hiv_positive: true,
            rita_recent: Some(recent),
            has_prior: prior.has_prior,
            prior_time: prior.time,
            prior_result: prior.result,
        }
    }

    pub fn prior(&self) -> PriorTriple {
        PriorTriple {
            has_prior: self.has_prior,
            time: self.prior_time,
            result: self.prior_result,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hiv_positive {
            if self.rita_recent.is_none() {
                return Err(Error::domain("HIV-positive record is missing its assay result"));
            }
            self.prior().validate()
        } else if self.rita_recent.is_some() || self.has_prior || self.prior_time.is_some() || self.prior_result.is_some() {
            Err(Error::domain("HIV-negative record carries assay or prior-test fields"))
        } else {
            Ok(())
        }
    }

    /// PT-RITA recency, false for negatives.
    pub fn pt_recent(&self, cutoff: f64) -> bool {
        self.hiv_positive && pt_recent(self.rita_recent == Some(true), &self.prior(), cutoff)
    }
}

/// Derived counts of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_rec: usize,
    pub n_rec_pt: usize,
}

/// A cross-sectional sample with the upper support `tau` of prior test times.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    records: Vec<CrossSectionRecord>,
    tau: f64,
}

impl Sample {
    pub fn new(records: Vec<CrossSectionRecord>) -> Result<Self> {
        Self::with_tau(records, f64::INFINITY)
    }

    pub fn with_tau(records: Vec<CrossSectionRecord>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::domain("tau must be positive"));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|e| Error::domain(format!("record {}: {e}", i + 1)))?;
            if let Some(t) = r.prior_time {
                if t > tau {
                    return Err(Error::domain(format!(
                        "record {}: prior time {t} exceeds tau {tau}",
                        i + 1
                    )));
                }
            }
        }
        Ok(Sample { records, tau })
    }

    pub fn records(&self) -> &[CrossSectionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<CrossSectionRecord> {
        self.records
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn positives(&self) -> impl Iterator<Item = &CrossSectionRecord> {
        self.records.iter().filter(|r| r.hiv_positive)
    }

    pub fn counts(&self, cutoff: f64) -> Counts {
        let mut c = Counts {
            n: self.records.len(),
            n_pos: 0,
            n_neg: 0,
            n_rec: 0,
            n_rec_pt: 0,
        };
        for r in &self.records {
            if r.hiv_positive {
                c.n_pos += 1;
                c.n_rec += usize::from(r.rita_recent == Some(true));
                c.n_rec_pt += usize::from(r.pt_recent(cutoff));
            } else {
                c.n_neg += 1;
            }
        }
        c
    }

    /// Drops prior tests taken more than `cutoff` before the survey.
    pub fn only_recent_priors(&self, cutoff: f64) -> Sample {
        let records = self
            .records
            .iter()
            .map(|r| match r.prior_time {
                Some(t) if t > cutoff => CrossSectionRecord {
                    has_prior: false,
                    prior_time: None,
                    prior_result: None,
                    ..r.clone()
                },
                _ => r.clone(),
            })
            .collect();
        Sample {
            records,
            tau: self.tau,
        }
    }

    /// The same sample with every prior test removed.
    pub fn without_priors(&self) -> Sample {
        let records = self
            .records
            .iter()
            .map(|r| CrossSectionRecord {
                has_prior: false,
                prior_time: None,
                prior_result: None,
                ..r.clone()
            })
            .collect();
        Sample {
            records,
            tau: self.tau,
        }
    }
}
