use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "recency", version, about = "Cross-sectional HIV incidence from recency assays and prior test results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard and enhanced incidence estimates with confidence intervals.
    Estimate {
        /// Cross-sectional sample CSV.
        #[arg(long)]
        sample: PathBuf,
        /// Fitted test-recent function (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Assay characteristics: mdri, mdri_variance, frr, frr_variance, cutoff (JSON).
        #[arg(long)]
        chars: PathBuf,
        /// Ignore prior tests older than the cutoff in the enhanced estimate.
        #[arg(long)]
        only_recent: bool,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Write the CSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run replicated simulation scenarios from a JSON file.
    Simulate {
        /// One scenario object or an array of them.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in every scenario.
        #[arg(long, env = "RECENCY_SEED")]
        seed: Option<u64>,
        /// Also write per-replicate estimates as JSON lines.
        #[arg(long)]
        per_replicate: bool,
        /// Write the first replicate's cross-sectional sample and calibration data.
        #[arg(long)]
        emit_data: bool,
    },
    /// Fit the test-recent function to calibration data.
    Calibrate {
        /// CSV with duration_years,recent.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 2.0)]
        cutoff: f64,
        /// False recent rate beyond the cutoff.
        #[arg(long)]
        frr: f64,
        #[arg(long, default_value_t = 0.0)]
        frr_variance: f64,
        /// Output path of the fitted model (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write the implied characteristics (JSON).
        #[arg(long)]
        chars_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Mean shadow period of the enhanced estimator.
    Shadow {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        chars: PathBuf,
        /// CSV with has_prior,prior_time_years, or a full sample CSV.
        #[arg(long)]
        prior_tests: PathBuf,
    },
    /// Run one of the built-in scenario sets.
    Reproduce {
        /// base, efficiency, testing-dependence, incidence or recall-bias.
        #[arg(long)]
        set: String,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, env = "RECENCY_SEED")]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate {
            sample,
            model,
            chars,
            only_recent,
            level,
            out,
            format,
        } => commands::estimate(&sample, &model, &chars, only_recent, level, out.as_deref(), format == Format::Json),
        Command::Simulate {
            scenario,
            out_dir,
            seed,
            per_replicate,
            emit_data,
        } => commands::simulate(&scenario, &out_dir, seed, per_replicate, emit_data),
        Command::Calibrate {
            data,
            degree,
            cutoff,
            frr,
            frr_variance,
            out,
            chars_out,
            level,
        } => commands::calibrate(&data, degree, cutoff, frr, frr_variance, &out, chars_out.as_deref(), level),
        Command::Shadow {
            model,
            chars,
            prior_tests,
        } => commands::shadow(&model, &chars, &prior_tests),
        Command::Reproduce {
            set,
            replicates,
            seed,
            out_dir,
        } => commands::reproduce(&set, replicates, seed, &out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e);
            ExitCode::from(e.exit_code())
        }
    }
}
