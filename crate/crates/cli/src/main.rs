use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use risloc::harness::{
    beta_curves, figure_configs, run_bounds_sweep, run_calibration_demo, run_rmse_sweep, write_csv, write_summary,
    ExperimentConfig, FigureId, FigureJob, RunOutput, RunSummary, SCHEMA_VERSION,
};
use risloc::validate::run_suite;
use risloc::Error;
use serde::Serialize;

/// Near-field RIS localization experiments: bounds, Monte Carlo RMSE and
/// figure data, written as CSV.
#[derive(Parser, Debug)]
#[command(name = "risloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config; defaults to the built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Phase schedules averaged per bound point.
    #[arg(long, global = true)]
    profile_realizations: Option<usize>,
    /// Desk-scale preset: 16 x 16 elements, T = 50.
    #[arg(long, global = true)]
    fast: bool,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bounds (LB, MCRB, bias, CRBs) over the configured sweep.
    BoundsSweep,
    /// Estimator RMSE over the configured sweep.
    RmseSweep,
    /// Position error per calibration sweep.
    CalibrateDemo,
    /// Data behind one published figure.
    ReproduceFigure {
        /// Figure id, e.g. rmse-vs-snr.
        id: String,
    },
    /// Run the property suite.
    Validate,
    /// Print the effective config as TOML.
    ShowConfig,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            match e {
                Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Other(e.to_string()),
                _ => Failure::Usage(e.to_string()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn apply_overrides(mut cfg: ExperimentConfig, c: &Common) -> Result<ExperimentConfig, Failure> {
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.run.trials = t;
    }
    if let Some(r) = c.profile_realizations {
        cfg.run.profile_realizations = r;
    }
    if c.sequential {
        cfg.run.parallel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn base_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if c.fast => ExperimentConfig::fast(),
        None => ExperimentConfig::paper(),
    };
    apply_overrides(cfg, c)
}

struct Written {
    hashes: Vec<String>,
    configs: Vec<serde_json::Value>,
    rows: usize,
    attempted: usize,
    failures: usize,
    first_error: Option<String>,
    numerical_failure: bool,
}

impl Written {
    fn new() -> Self {
        Self {
            hashes: vec![],
            configs: vec![],
            rows: 0,
            attempted: 0,
            failures: 0,
            first_error: None,
            numerical_failure: false,
        }
    }

    fn add<R>(&mut self, cfg: &ExperimentConfig, out: &RunOutput<R>) {
        self.hashes.push(out.config_hash.clone());
        self.configs.push(serde_json::to_value(cfg).expect("config serializes"));
        self.rows += out.rows.len();
        self.attempted += out.attempted;
        self.failures += out.failures;
        if self.first_error.is_none() {
            self.first_error.clone_from(&out.first_error);
        }
        self.numerical_failure |= out.numerical_failure;
    }
}

fn finish<R: Serialize>(
    dir: &Path,
    name: &str,
    rows: &[R],
    w: Written,
    start: Instant,
    parallel: bool,
) -> Result<ExitCode, Failure> {
    let csv = dir.join(format!("{name}.csv"));
    write_csv(&csv, rows)?;
    let summary = RunSummary {
        schema: SCHEMA_VERSION,
        command: name.to_string(),
        config_hashes: w.hashes,
        configs: w.configs,
        rows: w.rows,
        attempted: w.attempted,
        failures: w.failures,
        first_error: w.first_error.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        parallel,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_summary(&dir.join(format!("{name}.json")), &summary)?;
    println!("wrote {} ({} rows, {} failures of {})", csv.display(), w.rows, w.failures, w.attempted);
    if w.numerical_failure {
        return Err(Failure::Numerical(w.first_error.unwrap_or_else(|| "every trial failed".into())));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let c = &cli.common;
    let start = Instant::now();
    match &cli.command {
        Command::ShowConfig => {
            print!("{}", base_config(c)?.to_toml_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::BoundsSweep => {
            let cfg = base_config(c)?;
            let out = run_bounds_sweep(&cfg)?;
            let mut w = Written::new();
            w.add(&cfg, &out);
            finish(&c.out, "bounds-sweep", &out.rows, w, start, cfg.run.parallel)
        }
        Command::RmseSweep => {
            let cfg = base_config(c)?;
            let out = run_rmse_sweep(&cfg)?;
            let mut w = Written::new();
            w.add(&cfg, &out);
            finish(&c.out, "rmse-sweep", &out.rows, w, start, cfg.run.parallel)
        }
        Command::CalibrateDemo => {
            let mut cfg = base_config(c)?;
            if c.config.is_none() {
                cfg.sweep.snr_db = vec![10.0, 20.0, 30.0, 40.0];
            }
            let out = run_calibration_demo(&cfg)?;
            let mut w = Written::new();
            w.add(&cfg, &out);
            finish(&c.out, "calibrate-demo", &out.rows, w, start, cfg.run.parallel)
        }
        Command::ReproduceFigure { id } => {
            if c.config.is_some() {
                return Err(Failure::Usage("reproduce-figure uses built-in presets; drop --config".into()));
            }
            let fig: FigureId = id.parse()?;
            reproduce(fig, c, start)
        }
        Command::Validate => {
            let cfg = base_config(c)?;
            let report = run_suite(&cfg, cfg.run.seed);
            for ch in &report.checks {
                println!("{} {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
            }
            std::fs::create_dir_all(&c.out).map_err(Error::from)?;
            std::fs::write(
                c.out.join("validate.json"),
                serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
            )
            .map_err(Error::from)?;
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn reproduce(fig: FigureId, c: &Common, start: Instant) -> Result<ExitCode, Failure> {
    let name = fig.as_str();
    let jobs = figure_configs(fig, c.fast);
    let mut w = Written::new();
    let mut parallel = !c.sequential;
    let mut result_rows = Vec::new();
    let mut calib_rows = Vec::new();
    let mut beta_rows = Vec::new();
    for job in jobs {
        match job {
            FigureJob::BetaCurves(models) => beta_rows.extend(beta_curves(&models, 101)),
            FigureJob::Bounds(cfg) => {
                let cfg = apply_overrides(cfg, c)?;
                parallel = cfg.run.parallel;
                let out = run_bounds_sweep(&cfg)?;
                w.add(&cfg, &out);
                result_rows.extend(out.rows);
            }
            FigureJob::Rmse(cfg) => {
                let cfg = apply_overrides(cfg, c)?;
                parallel = cfg.run.parallel;
                let out = run_rmse_sweep(&cfg)?;
                w.add(&cfg, &out);
                result_rows.extend(out.rows);
            }
            FigureJob::Calibration(cfg) => {
                let cfg = apply_overrides(cfg, c)?;
                parallel = cfg.run.parallel;
                let out = run_calibration_demo(&cfg)?;
                w.add(&cfg, &out);
                calib_rows.extend(out.rows);
            }
        }
    }
    if !beta_rows.is_empty() {
        w.rows = beta_rows.len();
        finish(&c.out, name, &beta_rows, w, start, parallel)
    } else if !calib_rows.is_empty() {
        finish(&c.out, name, &calib_rows, w, start, parallel)
    } else {
        finish(&c.out, name, &result_rows, w, start, parallel)
    }
}
