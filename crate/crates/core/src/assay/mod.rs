//! Test-recent function φ(u), its integrals and covariance, and the derived
//! assay characteristics.

mod fit;
mod pt;

pub use fit::{fit_phi, CalibrationRecord};
pub use pt::{pt_frr_mc, pt_mdri, FrrMonteCarlo, PriorTest};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, GaussLegendre, SIMPSON_TOLERANCE};

/// One day, in years.
pub const DAY: f64 = 1.0 / 365.25;

/// Default lower clamp applied to durations before taking logarithms.
pub const DEFAULT_DURATION_FLOOR: f64 = DAY;

/// Logistic model of the probability of testing recent at infection duration `u`.
///
/// Below `cutoff`, φ(u) = logistic(θ₀ + θ₁x + … + θ_d x^d) with
/// x = ln(max(u, duration_floor)); at and beyond `cutoff` φ is the constant
/// `frr_tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct TestRecentFunction {
    degree: usize,
    coefficients: Vec<f64>,
    covariance: DMatrix<f64>,
    frr_tail: f64,
    cutoff: f64,
    duration_floor: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    degree: usize,
    coefficients: Vec<f64>,
    covariance: Vec<f64>,
    frr_tail: f64,
    cutoff: f64,
    duration_floor: f64,
}

impl TryFrom<RawModel> for TestRecentFunction {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let k = raw.degree + 1;
        if raw.covariance.len() != k * k {
            return Err(Error::domain(format!(
                "covariance must hold {} entries for degree {}, found {}",
                k * k,
                raw.degree,
                raw.covariance.len()
            )));
        }
        let cov = DMatrix::from_row_slice(k, k, &raw.covariance);
        TestRecentFunction::new(
            raw.degree,
            raw.coefficients,
            cov,
            raw.frr_tail,
            raw.cutoff,
            raw.duration_floor,
        )
    }
}

impl From<TestRecentFunction> for RawModel {
    fn from(f: TestRecentFunction) -> Self {
        let k = f.degree + 1;
        let mut covariance = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                covariance.push(f.covariance[(i, j)]);
            }
        }
        RawModel {
            degree: f.degree,
            coefficients: f.coefficients,
            covariance,
            frr_tail: f.frr_tail,
            cutoff: f.cutoff,
            duration_floor: f.duration_floor,
        }
    }
}

impl TestRecentFunction {
    pub fn new(
        degree: usize,
        coefficients: Vec<f64>,
        covariance: DMatrix<f64>,
        frr_tail: f64,
        cutoff: f64,
        duration_floor: f64,
    ) -> Result<Self> {
        let k = degree + 1;
        if coefficients.len() != k {
            return Err(Error::domain(format!(
                "expected {k} coefficients for degree {degree}, found {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        if covariance.nrows() != k || covariance.ncols() != k {
            return Err(Error::domain("covariance shape does not match degree"));
        }
        for i in 0..k {
            if !(covariance[(i, i)] >= 0.0) {
                return Err(Error::domain("covariance diagonal must be nonnegative"));
            }
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::domain("covariance must be symmetric"));
                }
            }
        }
        // store exactly symmetric
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        if !(0.0..=1.0).contains(&frr_tail) {
            return Err(Error::domain("frr_tail must lie in [0, 1]"));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::domain("cutoff must be positive"));
        }
        if !(duration_floor > 0.0 && duration_floor < cutoff) {
            return Err(Error::domain("duration_floor must lie in (0, cutoff)"));
        }
        Ok(TestRecentFunction {
            degree,
            coefficients,
            covariance,
            frr_tail,
            cutoff,
            duration_floor,
        })
    }

    /// φ ≡ `p` below the cutoff, with no coefficient uncertainty.
    pub fn constant(p: f64, frr_tail: f64, cutoff: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("constant φ must lie strictly inside (0, 1)"));
        }
        Self::new(
            0,
            vec![(p / (1.0 - p)).ln()],
            DMatrix::zeros(1, 1),
            frr_tail,
            cutoff,
            DEFAULT_DURATION_FLOOR,
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn frr_tail(&self) -> f64 {
        self.frr_tail
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn duration_floor(&self) -> f64 {
        self.duration_floor
    }

    pub fn with_covariance(self, covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.degree,
            self.coefficients,
            covariance,
            self.frr_tail,
            self.cutoff,
            self.duration_floor,
        )
    }

    fn basis(&self, u: f64) -> DVector<f64> {
        let x = u.max(self.duration_floor).ln();
        let mut b = DVector::zeros(self.degree + 1);
        let mut p = 1.0;
        for k in 0..=self.degree {
            b[k] = p;
            p *= x;
        }
        b
    }

    fn linear_predictor(&self, u: f64) -> f64 {
        let x = u.max(self.duration_floor).ln();
        // Horner
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// The logistic branch, used inside integrals over [0, cutoff] so the
    /// endpoint does not pick up the tail value.
    pub(crate) fn phi_inner(&self, u: f64) -> f64 {
        logistic(self.linear_predictor(u))
    }

    /// φ(u) without argument checks; `u` must be nonnegative.
    pub(crate) fn phi_raw(&self, u: f64) -> f64 {
        if u >= self.cutoff {
            self.frr_tail
        } else {
            logistic(self.linear_predictor(u))
        }
    }

    /// φ(u).
    pub fn phi(&self, u: f64) -> Result<f64> {
        check_duration(u)?;
        Ok(self.phi_raw(u))
    }

    /// Gradient of φ(u) with respect to θ. Zero at and beyond the cutoff.
    pub fn gradient(&self, u: f64) -> DVector<f64> {
        if u >= self.cutoff {
            return DVector::zeros(self.degree + 1);
        }
        let p = self.phi_raw(u);
        self.basis(u) * (p * (1.0 - p))
    }

    /// ∫₀ᵗ φ(u) du for 0 ≤ t ≤ cutoff, to absolute tolerance `tol`.
    pub fn integrate_phi(&self, t: f64, tol: f64) -> f64 {
        self.integrate_phi_between(0.0, t, tol)
    }

    // φ is constant below the floor; above it the integral is taken over
    // log-duration where the integrand is smooth.
    fn integrate_phi_between(&self, s: f64, t: f64, tol: f64) -> f64 {
        debug_assert!(s <= t && t <= self.cutoff);
        let floor = self.duration_floor;
        let mut total = 0.0;
        if s < floor {
            total += (t.min(floor) - s) * self.phi_inner(floor);
        }
        let lo = s.max(floor);
        if t > lo {
            total += adaptive_simpson(
                |x| {
                    let u = x.exp();
                    self.phi_inner(u) * u
                },
                lo.ln(),
                t.ln(),
                tol,
            );
        }
        total
    }

    /// Mean duration of recent infection, ∫₀^{T*} φ(u) du.
    pub fn mdri(&self) -> f64 {
        self.integrate_phi(self.cutoff, SIMPSON_TOLERANCE)
    }

    /// ∫₀ᵗ (1 − φ(u)) du for 0 ≤ t ≤ cutoff.
    pub fn residual_integral(&self, t: f64) -> Result<f64> {
        self.check_window(t)?;
        Ok(t - self.integrate_phi(t, SIMPSON_TOLERANCE))
    }

    /// `residual_integral` at many points, integrating once across the sorted
    /// arguments. Output order follows the input.
    pub fn residual_integrals(&self, ts: &[f64]) -> Result<Vec<f64>> {
        for &t in ts {
            self.check_window(t)?;
        }
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by(|&i, &j| ts[i].total_cmp(&ts[j]));
        let mut out = vec![0.0; ts.len()];
        let mut last_t = 0.0;
        let mut acc = 0.0;
        for i in order {
            let t = ts[i];
            if t > last_t {
                acc += self.integrate_phi_between(last_t, t, SIMPSON_TOLERANCE);
                last_t = t;
            }
            out[i] = t - acc;
        }
        Ok(out)
    }

    /// Delta-method covariance of φ̂(u) and φ̂(v).
    pub fn phi_cov(&self, u: f64, v: f64) -> Result<f64> {
        self.check_window(u)?;
        self.check_window(v)?;
        Ok(self.quadratic(&self.gradient(u), &self.gradient(v)))
    }

    /// G(t) = ∫₀ᵗ ∇_θ φ(u) du, by Gauss–Legendre in log-duration.
    pub fn integrated_gradient(&self, t: f64) -> Result<DVector<f64>> {
        self.check_window(t)?;
        Ok(self.integrated_gradient_raw(t))
    }

    fn integrated_gradient_raw(&self, t: f64) -> DVector<f64> {
        let floor = self.duration_floor;
        let mut g = self.gradient(floor) * t.min(floor);
        if t > floor {
            for (x, w) in GaussLegendre::standard().mapped(floor.ln(), t.ln()) {
                let u = x.exp();
                g += self.gradient(u) * (w * u);
            }
        }
        g
    }

    /// r_{tᵢ,tⱼ} = ∫₀^{tᵢ}∫₀^{tⱼ} ρ(u, v) dv du.
    ///
    /// ρ factorizes through the coefficient gradient, so the tensor-product
    /// rule reduces to G(tᵢ)ᵀ Σ_θ G(tⱼ).
    pub fn double_cov_integral(&self, t_i: f64, t_j: f64) -> Result<f64> {
        let gi = self.integrated_gradient(t_i)?;
        let gj = self.integrated_gradient(t_j)?;
        Ok(self.quadratic(&gi, &gj))
    }

    /// Delta-method variance of the MDRI estimate, r_{T*,T*}.
    pub fn mdri_variance(&self) -> f64 {
        let g = self.integrated_gradient_raw(self.cutoff);
        self.quadratic(&g, &g).max(0.0)
    }

    pub(crate) fn quadratic(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.covariance * b)[(0, 0)]
    }

    fn check_window(&self, t: f64) -> Result<()> {
        check_duration(t)?;
        if t > self.cutoff {
            return Err(Error::domain(format!(
                "duration {t} exceeds the cutoff {}",
                self.cutoff
            )));
        }
        Ok(())
    }
}

fn check_duration(u: f64) -> Result<()> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::domain(format!("duration must be nonnegative, got {u}")));
    }
    Ok(())
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Calibration summary of the recency assay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RitaCharacteristics {
    pub mdri: f64,
    pub mdri_variance: f64,
    pub frr: f64,
    pub frr_variance: f64,
    pub cutoff: f64,
}

impl RitaCharacteristics {
    pub fn new(mdri: f64, mdri_variance: f64, frr: f64, frr_variance: f64, cutoff: f64) -> Result<Self> {
        let c = RitaCharacteristics {
            mdri,
            mdri_variance,
            frr,
            frr_variance,
            cutoff,
        };
        c.validate()?;
        Ok(c)
    }

    /// Characteristics implied by a fitted φ, with externally supplied FRR.
    pub fn from_fit(f: &TestRecentFunction, frr: f64, frr_variance: f64) -> Result<Self> {
        Self::new(f.mdri(), f.mdri_variance(), frr, frr_variance, f.cutoff())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::domain("cutoff must be positive"));
        }
        if !(0.0..=self.cutoff).contains(&self.mdri) {
            return Err(Error::domain("mdri must lie in [0, cutoff]"));
        }
        if !(0.0..=1.0).contains(&self.frr) {
            return Err(Error::domain("frr must lie in [0, 1]"));
        }
        if !(self.mdri_variance >= 0.0 && self.frr_variance >= 0.0) {
            return Err(Error::domain("variances must be nonnegative"));
        }
        Ok(())
    }
}
