//! Replicated simulation studies and brute-force verification oracles.

mod metrics;
pub mod oracles;
pub mod scenarios;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assay::{fit_phi, RitaCharacteristics, TestRecentFunction};
use crate::error::{Error, Result};
use crate::estimators::{estimate, IncidenceEstimate, Method, Sample};
use crate::rng::{substream, Purpose};
use crate::simulate::{
    calibration_replicate, default_visit_grid, simulate_replicate, CrossSectionDesign, EpidemicParams,
    PriorTestingSpec, RecallBiasSpec, TrueAssay,
};

pub use metrics::{mse_reduction, summarize, write_metrics_csv, write_metrics_rows_csv, write_plot_csv, MetricsRow, MetricsTable, PlotPoint};
pub use oracles::{
    bisection_duration, oracle_inverse_sampler, oracle_pt_mdri_mc, oracle_variance_mc, oracle_w_delta,
    prior_test_population, InverseSamplerReport,
    PtMdriOracle, VarianceOracle, WDeltaOracle,
};

/// Where the FRR estimate and its variance come from in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrrCalibration {
    /// β̂ = X/n with X ~ Binomial(n, β) and variance β̂(1 − β̂)/n.
    Subsample { n: u64 },
    /// The true β with the given standard error.
    Fixed { sd: f64 },
}

/// External calibration study used to estimate φ in every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationDesign {
    pub n_subjects: usize,
    pub visits: usize,
    pub degree: usize,
    /// Skip fitting and use the true φ with no coefficient uncertainty.
    pub use_true_phi: bool,
    pub frr: FrrCalibration,
}

impl Default for CalibrationDesign {
    fn default() -> Self {
        CalibrationDesign {
            n_subjects: 100,
            visits: 40,
            degree: 1,
            use_true_phi: false,
            frr: FrrCalibration::Subsample { n: 1000 },
        }
    }
}

fn default_prior() -> PriorTestingSpec {
    PriorTestingSpec::None
}

fn default_estimators() -> Vec<Method> {
    vec![Method::Standard, Method::Enhanced]
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub sample_size: usize,
    pub replicates: usize,
    pub epidemic: EpidemicParams,
    #[serde(default)]
    pub assay_truth: TrueAssay,
    #[serde(default)]
    pub calibration: CalibrationDesign,
    #[serde(default = "default_prior")]
    pub prior_testing: PriorTestingSpec,
    #[serde(default)]
    pub recall_bias: Option<RecallBiasSpec>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Method>,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: u64,
}

/// A scenario file holds one scenario or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScenarioFile {
    One(Box<ScenarioConfig>),
    Many(Vec<ScenarioConfig>),
}

impl ScenarioFile {
    pub fn into_vec(self) -> Vec<ScenarioConfig> {
        match self {
            ScenarioFile::One(c) => vec![*c],
            ScenarioFile::Many(v) => v,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 || self.replicates == 0 {
            return Err(Error::domain("sample_size and replicates must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::domain("no estimators requested"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::domain("confidence level must lie in (0, 1)"));
        }
        if (self.epidemic.cutoff - self.assay_truth.cutoff).abs() > 1e-12 {
            return Err(Error::domain("epidemic and assay cutoffs differ"));
        }
        self.epidemic.validate()?;
        self.prior_testing.validate()?;
        if let Some(b) = &self.recall_bias {
            b.validate()?;
        }
        let c = &self.calibration;
        if !c.use_true_phi && (c.n_subjects == 0 || c.visits == 0) {
            return Err(Error::domain("calibration design is empty"));
        }
        match c.frr {
            FrrCalibration::Subsample { n } if n == 0 => Err(Error::domain("FRR subsample is empty")),
            FrrCalibration::Fixed { sd } if !(sd >= 0.0) => Err(Error::domain("FRR sd must be nonnegative")),
            _ => Ok(()),
        }
    }
}

/// Everything one replicate produced, in the order of `config.estimators`.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// Share of positives whose prior test each estimator used.
    pub q_star: Vec<Option<f64>>,
    pub estimates: Vec<std::result::Result<IncidenceEstimate, String>>,
    /// Fitted characteristics, absent when calibration failed.
    pub chars: Option<RitaCharacteristics>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub truth: TestRecentFunction,
    pub replicates: Vec<ReplicateOutcome>,
}

impl ScenarioRun {
    pub fn metrics(&self) -> Result<MetricsTable> {
        summarize(self)
    }
}

/// φ̂ and characteristics for one replicate.
pub fn calibrate_replicate(
    config: &ScenarioConfig,
    truth: &TestRecentFunction,
    replicate: u64,
) -> Result<(TestRecentFunction, RitaCharacteristics)> {
    let beta = config.assay_truth.frr;
    let (frr, frr_var) = match config.calibration.frr {
        FrrCalibration::Fixed { sd } => (beta, sd * sd),
        FrrCalibration::Subsample { n } => {
            let mut rng = substream(config.seed, replicate, Purpose::FalseRecentRate, 0);
            let x = Binomial::new(n, beta)
                .map_err(|e| Error::domain(format!("FRR subsample: {e}")))?
                .sample(&mut rng);
            let b = x as f64 / n as f64;
            (b, b * (1.0 - b) / n as f64)
        }
    };
    let c = &config.calibration;
    let f = if c.use_true_phi {
        truth.clone()
    } else {
        let grid = default_visit_grid(config.epidemic.cutoff, c.visits);
        let data = calibration_replicate(truth, c.n_subjects, &grid, config.seed, replicate)?;
        fit_phi(&data, c.degree, config.epidemic.cutoff, frr)?
    };
    let chars = RitaCharacteristics::from_fit(&f, frr, frr_var)?;
    Ok((f, chars))
}

fn q_star(sample: &Sample, method: Method, cutoff: f64) -> Option<f64> {
    let n_pos = sample.positives().count();
    if n_pos == 0 {
        return None;
    }
    let used = match method {
        Method::Standard => return None,
        Method::Enhanced => sample.positives().filter(|r| r.has_prior).count(),
        Method::EnhancedOnlyRecent => sample
            .positives()
            .filter(|r| r.prior_time.is_some_and(|t| t <= cutoff))
            .count(),
    };
    Some(used as f64 / n_pos as f64)
}

fn run_replicate(config: &ScenarioConfig, truth: &TestRecentFunction, replicate: usize) -> ReplicateOutcome {
    let k = config.estimators.len();
    let fail = |msg: String| ReplicateOutcome {
        replicate,
        q_star: vec![None; k],
        estimates: vec![Err(msg); k],
        chars: None,
    };
    let (f, chars) = match calibrate_replicate(config, truth, replicate as u64) {
        Ok(v) => v,
        Err(e) => return fail(format!("calibration: {e}")),
    };
    let design = CrossSectionDesign {
        params: &config.epidemic,
        f: truth,
        testing: &config.prior_testing,
        bias: config.recall_bias.as_ref(),
    };
    let sample = match simulate_replicate(&design, config.sample_size, config.seed, replicate as u64) {
        Ok(s) => s,
        Err(e) => return fail(format!("simulation: {e}")),
    };
    let cutoff = config.epidemic.cutoff;
    ReplicateOutcome {
        replicate,
        q_star: config.estimators.iter().map(|&m| q_star(&sample, m, cutoff)).collect(),
        estimates: config
            .estimators
            .iter()
            .map(|&m| estimate(&sample, &f, &chars, m, config.level).map_err(|e| e.to_string()))
            .collect(),
        chars: Some(chars),
    }
}

/// Runs every replicate (in parallel) and keeps per-replicate outcomes.
pub fn run_scenario_detailed(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let truth = config.assay_truth.phi()?;
    let replicates = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, &truth, r))
        .collect();
    Ok(ScenarioRun {
        config: config.clone(),
        truth,
        replicates,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsTable> {
    run_scenario_detailed(config)?.metrics()
}
