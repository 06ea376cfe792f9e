use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use recency_core::assay::{fit_phi, RitaCharacteristics, TestRecentFunction};
use recency_core::estimators::{estimate as run_estimator, normal_quantile, shadow_period, Method};
use recency_core::harness::{
    calibrate_replicate, run_scenario_detailed, scenarios, write_metrics_rows_csv, write_plot_csv, MetricsTable,
    ScenarioConfig, ScenarioFile,
};
use recency_core::io::{
    read_calibration_csv, read_json, read_prior_tests_csv, read_sample_csv, write_calibration_csv,
    write_estimates_csv, write_json, write_sample_csv,
};
use recency_core::simulate::{calibration_replicate, default_visit_grid, simulate_replicate, CrossSectionDesign};
use recency_core::Error;

/// A failed command: the library error plus which input it came from.
pub struct Failure {
    error: Error,
    context: Option<String>,
}

impl Failure {
    pub fn category(&self) -> &'static str {
        match self.error {
            Error::Schema { .. } | Error::Csv(_) => "schema",
            Error::Json(_) | Error::Domain(_) => "input",
            Error::Estimation(_) => "estimation",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "schema" | "input" => 2,
            "estimation" => 3,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.context {
            Some(c) => write!(f, "{c}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, context: None }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Result<T> = std::result::Result<T, Failure>;

trait Context<T> {
    fn context(self, what: &Path) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, Error> {
    fn context(self, what: &Path) -> Result<T> {
        self.map_err(|error| Failure {
            error,
            context: Some(what.display().to_string()),
        })
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(Error::Io).context(path)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::Io).context(path)?))
}

fn load_model(model: &Path, chars: &Path) -> Result<(TestRecentFunction, RitaCharacteristics)> {
    let f: TestRecentFunction = read_json(model).context(model)?;
    let c: RitaCharacteristics = read_json(chars).context(chars)?;
    c.validate().context(chars)?;
    Ok((f, c))
}

pub fn estimate(
    sample: &Path,
    model: &Path,
    chars: &Path,
    only_recent: bool,
    level: f64,
    out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let (f, c) = load_model(model, chars)?;
    let s = read_sample_csv(open(sample)?).context(sample)?;
    let enhanced = if only_recent { Method::EnhancedOnlyRecent } else { Method::Enhanced };
    let estimates = [Method::Standard, enhanced]
        .into_iter()
        .map(|m| run_estimator(&s, &f, &c, m, level))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    if json {
        serde_json::to_writer_pretty(&mut sink, &estimates).map_err(Error::Json)?;
        writeln!(sink)?;
    } else {
        write_estimates_csv(&mut sink, &estimates)?;
    }
    sink.flush()?;
    Ok(())
}

pub fn simulate(
    scenario: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    per_replicate: bool,
    emit_data: bool,
) -> Result<()> {
    let file: ScenarioFile = read_json(scenario).context(scenario)?;
    let mut configs = file.into_vec();
    if configs.is_empty() {
        return Err(Error::Domain("scenario file holds no scenarios".into())).context(scenario);
    }
    for (i, c) in configs.iter_mut().enumerate() {
        if let Some(s) = seed {
            c.seed = s;
        }
        if c.name.is_empty() {
            c.name = format!("scenario_{}", i + 1);
        }
        c.validate().context(scenario)?;
    }
    std::fs::create_dir_all(out_dir)?;
    let tables = run_all(&configs, out_dir, per_replicate)?;
    if emit_data {
        for c in &configs {
            emit_first_replicate(c, out_dir)?;
        }
    }
    report(&tables)
}

fn run_all(configs: &[ScenarioConfig], out_dir: &Path, per_replicate: bool) -> Result<Vec<MetricsTable>> {
    let mut tables = Vec::with_capacity(configs.len());
    let mut lines = if per_replicate { Some(create(&out_dir.join("replicates.jsonl"))?) } else { None };
    for c in configs {
        let run = run_scenario_detailed(c)?;
        if let Some(w) = lines.as_mut() {
            for r in &run.replicates {
                let estimates: Vec<serde_json::Value> = r
                    .estimates
                    .iter()
                    .zip(&c.estimators)
                    .map(|(e, m)| match e {
                        Ok(e) => serde_json::to_value(e).unwrap_or_default(),
                        Err(msg) => serde_json::json!({ "method": m, "error": msg }),
                    })
                    .collect();
                let line = serde_json::json!({ "scenario": c.name, "replicate": r.replicate, "estimates": estimates });
                writeln!(w, "{line}")?;
            }
        }
        tables.push(run.metrics()?);
    }
    if let Some(mut w) = lines {
        w.flush()?;
    }
    let rows: Vec<_> = tables.iter().flat_map(|t| t.rows.iter().cloned()).collect();
    let mut w = create(&out_dir.join("metrics.csv"))?;
    write_metrics_rows_csv(&mut w, &rows)?;
    w.flush()?;
    write_json(&out_dir.join("metrics.json"), &rows)?;
    Ok(tables)
}

fn emit_first_replicate(c: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let truth = c.assay_truth.phi()?;
    let design = CrossSectionDesign {
        params: &c.epidemic,
        f: &truth,
        testing: &c.prior_testing,
        bias: c.recall_bias.as_ref(),
    };
    let sample = simulate_replicate(&design, c.sample_size, c.seed, 0)?;
    let mut w = create(&out_dir.join(format!("{}_sample.csv", c.name)))?;
    write_sample_csv(&mut w, &sample)?;
    w.flush()?;
    let grid = default_visit_grid(c.epidemic.cutoff, c.calibration.visits.max(1));
    let data = calibration_replicate(&truth, c.calibration.n_subjects, &grid, c.seed, 0)?;
    let mut w = create(&out_dir.join(format!("{}_calibration.csv", c.name)))?;
    write_calibration_csv(&mut w, &data)?;
    w.flush()?;
    let (f, chars) = calibrate_replicate(c, &truth, 0)?;
    write_json(&out_dir.join(format!("{}_model.json", c.name)), &f)?;
    write_json(&out_dir.join(format!("{}_chars.json", c.name)), &chars)?;
    Ok(())
}

fn report(tables: &[MetricsTable]) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "scenario,estimator,failures,bias,se,see,mse,coverage,pct_mse_reduction")?;
    for r in tables.iter().flat_map(|t| &t.rows) {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.4e},{:.2},{}",
            r.scenario,
            r.estimator,
            r.failures,
            r.bias,
            r.se,
            r.see,
            r.mse,
            r.coverage,
            r.pct_mse_reduction.map(|x| format!("{x:.2}")).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    data: &Path,
    degree: usize,
    cutoff: f64,
    frr: f64,
    frr_variance: f64,
    out: &Path,
    chars_out: Option<&Path>,
    level: f64,
) -> Result<()> {
    let records = read_calibration_csv(open(data)?).context(data)?;
    let f = fit_phi(&records, degree, cutoff, frr).context(data)?;
    write_json(out, &f)?;
    let z = normal_quantile(level)?;
    let mdri = f.mdri();
    let sd = f.mdri_variance().sqrt();
    let days = 365.25;
    println!(
        "mdri_days={:.2} ci_lower_days={:.2} ci_upper_days={:.2} level={level} records={}",
        mdri * days,
        (mdri - z * sd) * days,
        (mdri + z * sd) * days,
        records.len()
    );
    if let Some(p) = chars_out {
        let c = RitaCharacteristics::from_fit(&f, frr, frr_variance)?;
        write_json(p, &c)?;
    }
    Ok(())
}

pub fn shadow(model: &Path, chars: &Path, prior_tests: &Path) -> Result<()> {
    let (f, c) = load_model(model, chars)?;
    let tests = read_prior_tests_csv(open(prior_tests)?).context(prior_tests)?;
    let omega = shadow_period(&f, &c, &tests)?;
    println!("omega_star_years={omega:.10} omega_star_days={:.4}", omega * 365.25);
    Ok(())
}

pub fn reproduce(set: &str, replicates: usize, seed: u64, out_dir: &Path) -> Result<()> {
    let configs = scenarios::builtin(set, replicates, seed).ok_or_else(|| {
        Error::Domain(format!(
            "unknown scenario set '{set}', expected one of: {}",
            scenarios::BUILTIN.join(", ")
        ))
    })?;
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("scenarios.json"), &configs)?;
    let tables = run_all(&configs, out_dir, false)?;
    let points = scenarios::reduction_points(&configs, &tables);
    if !points.is_empty() {
        let mut w = create(&out_dir.join("plot.csv"))?;
        write_plot_csv(&mut w, &points)?;
        w.flush()?;
    }
    report(&tables)
}
