//! Experiment harness: bound sweeps, Monte Carlo RMSE campaigns and the
//! calibration demo, written as CSV with a JSON run summary.

pub mod config;
pub mod figures;
pub mod output;
mod runs;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, SweepPoint, SweepVariable};
pub use figures::{figure_configs, FigureId, FigureJob};
pub use output::{write_csv, write_summary, RunSummary, SCHEMA_VERSION};
pub use runs::{beta_curves, run_bounds_sweep, run_calibration_demo, run_rmse_sweep};

/// Independent random streams.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Schedule = 1,
    Noise = 2,
    Solver = 3,
}

/// `hash(master, stream, a, b)` folded to 64 bits.
pub fn derive_seed(master: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((stream as u64).to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// One CSV row of a bound or RMSE sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub sweep: String,
    pub value: Option<f64>,
    pub snr_db: f64,
    pub elements: usize,
    pub transmissions: usize,
    pub beta_min: f64,
    pub kappa: f64,
    pub phi: f64,
    pub scenario: String,
    /// `bound`, `amml`, `aml` or `aml-known`.
    pub estimator: String,
    pub rmse: Option<f64>,
    pub rmse_se: Option<f64>,
    /// Successful trials (or schedules, for bound rows).
    pub count: usize,
    pub failures: usize,
    pub lb: Option<f64>,
    pub mcrb: Option<f64>,
    pub bias: Option<f64>,
    pub crb: Option<f64>,
}

/// Position error per calibration sweep, pooled over trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub config_hash: String,
    pub snr_db: f64,
    pub iteration: usize,
    pub position_rmse: Option<f64>,
    pub position_se: Option<f64>,
    pub mean_objective: Option<f64>,
    pub count: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCurveRow {
    pub theta: f64,
    pub beta_min: f64,
    pub kappa: f64,
    pub phi: f64,
    pub beta: f64,
}

/// Rows plus bookkeeping for one run.
#[derive(Clone, Debug)]
pub struct RunOutput<R> {
    pub rows: Vec<R>,
    pub config_hash: String,
    /// Trials or schedules attempted.
    pub attempted: usize,
    pub failures: usize,
    /// First failure message, if any.
    pub first_error: Option<String>,
    /// A row ended with no successful trial and the cause was numerical.
    pub numerical_failure: bool,
}

/// `sqrt(mean e²)` with its delta-method standard error.
pub fn rmse_with_se(sq_errors: &[f64]) -> Option<(f64, f64)> {
    let n = sq_errors.len();
    if n == 0 {
        return None;
    }
    let mean = sq_errors.iter().sum::<f64>() / n as f64;
    let rmse = mean.sqrt();
    if n == 1 || rmse == 0.0 {
        return Some((rmse, 0.0));
    }
    let var = sq_errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mse = (var / n as f64).sqrt();
    Some((rmse, se_mse / (2.0 * rmse)))
}
