//! Cross-sectional HIV incidence estimation from recency-assay results and
//! prior HIV test reports.
//!
//! - [`assay`]: the test-recent function φ and assay characteristics.
//! - [`estimators`]: standard and enhanced estimators with analytic variance.
//! - [`simulate`]: synthetic surveys and calibration data.
//! - [`harness`]: replicated simulation studies and verification oracles.

pub mod assay;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod quadrature;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
