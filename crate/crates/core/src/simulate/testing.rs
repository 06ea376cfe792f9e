use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PriorTriple;

/// Generalized gamma law of the delay between infection and a
/// symptom-driven test: density ∝ x^(shape−1) exp(−(x/scale)^power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedGamma {
    pub shape: f64,
    pub scale: f64,
    pub power: f64,
}

impl Default for GeneralizedGamma {
    fn default() -> Self {
        GeneralizedGamma {
            shape: 1.2,
            scale: 5.271925621957459,
            power: 0.9,
        }
    }
}

impl GeneralizedGamma {
    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.scale > 0.0 && self.power > 0.0) {
            return Err(Error::domain("generalized gamma parameters must be positive"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape / self.power, 1.0).expect("validated parameters");
        self.scale * g.sample(rng).powf(1.0 / self.power)
    }
}

/// How prior HIV tests arise among positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum PriorTestingSpec {
    /// No prior tests at all.
    None,
    /// Q ~ Bernoulli(q), T ~ Uniform[a, b], independent of infection.
    Uniform { q: f64, a: f64, b: f64 },
    /// Only a test taken a random delay after infection.
    InfectionDriven { delay: GeneralizedGamma },
    /// Baseline uniform testing plus an infection-driven test; the most
    /// recent of the two is reported.
    Mixed {
        q_prime: f64,
        a_prime: f64,
        b_prime: f64,
        delay: GeneralizedGamma,
    },
}

fn check_arm(q: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain("testing probability must lie in [0, 1]"));
    }
    if !(a >= 0.0 && a < b && b.is_finite()) {
        return Err(Error::domain("prior test window must satisfy 0 <= a < b"));
    }
    Ok(())
}

impl PriorTestingSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorTestingSpec::None => Ok(()),
            PriorTestingSpec::Uniform { q, a, b } => check_arm(q, a, b),
            PriorTestingSpec::InfectionDriven { delay } => delay.validate(),
            PriorTestingSpec::Mixed {
                q_prime,
                a_prime,
                b_prime,
                delay,
            } => {
                check_arm(q_prime, a_prime, b_prime)?;
                delay.validate()
            }
        }
    }

    /// Whether (Q, T) is drawn without reference to the infection duration.
    pub fn independent_of_infection(&self) -> bool {
        matches!(self, PriorTestingSpec::None | PriorTestingSpec::Uniform { .. })
    }

    /// Upper support of T given the maximal infection duration.
    pub fn support(&self, c_t: f64) -> f64 {
        match *self {
            PriorTestingSpec::None => 0.0,
            PriorTestingSpec::Uniform { b, .. } => b,
            PriorTestingSpec::InfectionDriven { .. } => c_t,
            PriorTestingSpec::Mixed { b_prime, .. } => b_prime.max(c_t),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> PriorTriple {
        match *self {
            PriorTestingSpec::None => PriorTriple::NONE,
            PriorTestingSpec::Uniform { q, a, b } => draw_prior_test_uniform(q, a, b, u, rng),
            PriorTestingSpec::InfectionDriven { delay } => combine(None, u - delay.sample(rng), u),
            PriorTestingSpec::Mixed {
                q_prime,
                a_prime,
                b_prime,
                delay,
            } => {
                let available = rng.random::<f64>() < q_prime;
                let t1 = a_prime + (b_prime - a_prime) * rng.random::<f64>();
                let t2 = u - delay.sample(rng);
                combine(available.then_some(t1), t2, u)
            }
        }
    }
}

/// Uniform mechanism: availability q, time uniform on [a, b].
pub fn draw_prior_test_uniform<R: Rng + ?Sized>(q: f64, a: f64, b: f64, u: f64, rng: &mut R) -> PriorTriple {
    let available = rng.random::<f64>() < q;
    let t = a + (b - a) * rng.random::<f64>();
    if available {
        PriorTriple::tested(t, t <= u)
    } else {
        PriorTriple::NONE
    }
}

/// Infection-driven or mixed mechanism for one positive with duration `u`.
pub fn draw_prior_test_infection_driven<R: Rng + ?Sized>(spec: &PriorTestingSpec, u: f64, rng: &mut R) -> PriorTriple {
    spec.draw(u, rng)
}

// T = T₁ when the baseline arm is available and more recent than the
// infection-driven test (or that test would postdate the survey), else T₂.
fn combine(t1: Option<f64>, t2: f64, u: f64) -> PriorTriple {
    let t = match t1 {
        Some(t1) if t1 < t2 || t2 < 0.0 => t1,
        _ => t2,
    };
    if t >= 0.0 {
        PriorTriple::tested(t, t <= u)
    } else {
        PriorTriple::NONE
    }
}

/// Misreporting of prior tests by respondents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecallBiasSpec {
    #[serde(default)]
    pub time_jitter_sd: f64,
    #[serde(default)]
    pub nonreport_positive_prob: f64,
    #[serde(default)]
    pub flip_positive_prob: f64,
}

impl RecallBiasSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_jitter_sd >= 0.0 && self.time_jitter_sd.is_finite()) {
            return Err(Error::domain("time jitter must be nonnegative"));
        }
        for p in [self.nonreport_positive_prob, self.flip_positive_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain("recall-bias probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Jitters the recalled time (clamped at zero), then drops positive prior
/// tests with the nonreport probability, then reports surviving positive
/// results as negative with the flip probability.
pub fn apply_recall_bias<R: Rng + ?Sized>(triple: PriorTriple, spec: &RecallBiasSpec, rng: &mut R) -> PriorTriple {
    let (Some(t), Some(delta)) = (triple.time, triple.result) else {
        return triple;
    };
    let z: f64 = rng.sample(StandardNormal);
    let drop_u = rng.random::<f64>();
    let flip_u = rng.random::<f64>();
    let t = (t + spec.time_jitter_sd * z).max(0.0);
    if delta && drop_u < spec.nonreport_positive_prob {
        return PriorTriple::NONE;
    }
    let delta = delta && !(flip_u < spec.flip_positive_prob);
    PriorTriple::tested(t, delta)
}
