use std::io::Write;

use serde::Serialize;

use super::ScenarioRun;
use crate::error::{Error, Result};
use crate::estimators::Method;

/// Summary of one estimator across the replicates of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub estimator: Method,
    pub replicates: usize,
    pub failures: usize,
    pub truth: f64,
    pub q_star: Option<f64>,
    pub mean_estimate: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub bias: f64,
    pub se: f64,
    pub see: f64,
    pub mse: f64,
    pub coverage: f64,
    pub pct_mse_reduction: Option<f64>,
    /// Fewer than two successful replicates, so `se` is reported as 0.
    pub se_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, estimator: Method) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }
}

/// Percentage MSE reduction of the enhanced estimator.
pub fn mse_reduction(standard_mse: f64, enhanced_mse: f64) -> Result<f64> {
    if !(standard_mse > 0.0) {
        return Err(Error::domain("standard MSE must be positive"));
    }
    Ok(100.0 * (1.0 - enhanced_mse / standard_mse))
}

// Neumaier summation
fn sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

fn mean(xs: &[f64]) -> f64 {
    sum(xs.iter().copied()) / xs.len() as f64
}

// linear interpolation between order statistics
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(run: &ScenarioRun) -> Result<MetricsTable> {
    let config = &run.config;
    let truth = config.epidemic.lambda;
    let mut rows = Vec::with_capacity(config.estimators.len());
    for (k, &method) in config.estimators.iter().enumerate() {
        let ok: Vec<_> = run.replicates.iter().filter_map(|r| r.estimates[k].as_ref().ok()).collect();
        let failures = run.replicates.len() - ok.len();
        if ok.is_empty() {
            return Err(Error::estimation(format!(
                "{method}: all {} replicates failed in scenario '{}'",
                run.replicates.len(),
                config.name
            )));
        }
        let lambdas: Vec<f64> = ok.iter().map(|e| e.lambda).collect();
        let m = mean(&lambdas);
        let r = lambdas.len() as f64;
        let se_undefined = lambdas.len() < 2;
        let se = if se_undefined {
            0.0
        } else {
            (sum(lambdas.iter().map(|x| (x - m) * (x - m))) / (r - 1.0)).sqrt()
        };
        let mut sorted = lambdas.clone();
        sorted.sort_by(f64::total_cmp);
        let qs: Vec<f64> = run.replicates.iter().filter_map(|r| r.q_star[k]).collect();
        rows.push(MetricsRow {
            scenario: config.name.clone(),
            estimator: method,
            replicates: run.replicates.len(),
            failures,
            truth,
            q_star: (!qs.is_empty()).then(|| mean(&qs)),
            mean_estimate: m,
            median: quantile(&sorted, 0.5),
            q25: quantile(&sorted, 0.25),
            q75: quantile(&sorted, 0.75),
            bias: m - truth,
            se,
            see: mean(&ok.iter().map(|e| e.variance.sqrt()).collect::<Vec<_>>()),
            mse: mean(&lambdas.iter().map(|x| (x - truth) * (x - truth)).collect::<Vec<_>>()),
            coverage: 100.0 * ok.iter().filter(|e| e.ci_lower <= truth && truth <= e.ci_upper).count() as f64 / r,
            pct_mse_reduction: None,
            se_undefined,
        });
    }
    if let Some(std_mse) = rows.iter().find(|r| r.estimator == Method::Standard).map(|r| r.mse) {
        for row in rows.iter_mut().filter(|r| r.estimator != Method::Standard) {
            row.pct_mse_reduction = mse_reduction(std_mse, row.mse).ok();
        }
    }
    Ok(MetricsTable { rows })
}

fn fmt(x: f64) -> String {
    format!("{x:.10e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(out: W, table: &MetricsTable) -> Result<()> {
    write_metrics_rows_csv(out, &table.rows)
}

/// Rows from any number of tables under one header.
pub fn write_metrics_rows_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "estimator",
        "replicates",
        "failures",
        "truth",
        "q_star",
        "mean_estimate",
        "median",
        "q25",
        "q75",
        "bias",
        "se",
        "see",
        "mse",
        "coverage",
        "pct_mse_reduction",
        "se_undefined",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.estimator.to_string(),
            r.replicates.to_string(),
            r.failures.to_string(),
            fmt(r.truth),
            fmt_opt(r.q_star),
            fmt(r.mean_estimate),
            fmt(r.median),
            fmt(r.q25),
            fmt(r.q75),
            fmt(r.bias),
            fmt(r.se),
            fmt(r.see),
            fmt(r.mse),
            format!("{:.4}", r.coverage),
            r.pct_mse_reduction.map(|x| format!("{x:.4}")).unwrap_or_default(),
            (r.se_undefined as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of an x/y series for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

pub fn write_plot_csv<W: Write>(out: W, points: &[PlotPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y"])?;
    for p in points {
        w.write_record([p.series.clone(), fmt(p.x), fmt(p.y)])?;
    }
    w.flush()?;
    Ok(())
}
