//! Preset experiments, one per published figure.

use std::fmt;
use std::str::FromStr;

use super::config::{ExperimentConfig, SweepVariable};
use crate::bounds::Scenario;
use crate::ris_model::RisAmplitudeParams;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureId {
    BetaCurves,
    BoundsVsBetaMin,
    BoundsVsKappa,
    BoundsVsElements,
    RmseVsSnr,
    BiasVsSnr,
    RmseVsKappa,
    RmseVsBetaMin,
    CalibrationIterations,
    RmseVsSnrT10,
}

impl FigureId {
    pub const ALL: [FigureId; 10] = [
        FigureId::BetaCurves,
        FigureId::BoundsVsBetaMin,
        FigureId::BoundsVsKappa,
        FigureId::BoundsVsElements,
        FigureId::RmseVsSnr,
        FigureId::BiasVsSnr,
        FigureId::RmseVsKappa,
        FigureId::RmseVsBetaMin,
        FigureId::CalibrationIterations,
        FigureId::RmseVsSnrT10,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::BetaCurves => "beta-curves",
            FigureId::BoundsVsBetaMin => "bounds-vs-betamin",
            FigureId::BoundsVsKappa => "bounds-vs-kappa",
            FigureId::BoundsVsElements => "bounds-vs-elements",
            FigureId::RmseVsSnr => "rmse-vs-snr",
            FigureId::BiasVsSnr => "bias-vs-snr",
            FigureId::RmseVsKappa => "rmse-vs-kappa",
            FigureId::RmseVsBetaMin => "rmse-vs-betamin",
            FigureId::CalibrationIterations => "calibration-iterations",
            FigureId::RmseVsSnrT10 => "rmse-vs-snr-t10",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL.iter().copied().find(|f| f.as_str() == s).ok_or_else(|| {
            let ids: Vec<_> = Self::ALL.iter().map(|f| f.as_str()).collect();
            Error::Config(format!("unknown figure '{s}', expected one of: {}", ids.join(", ")))
        })
    }
}

#[derive(Clone, Debug)]
pub enum FigureJob {
    BetaCurves(Vec<RisAmplitudeParams>),
    Bounds(ExperimentConfig),
    Rmse(ExperimentConfig),
    Calibration(ExperimentConfig),
}

fn zeta(beta_min: f64, kappa: f64) -> RisAmplitudeParams {
    RisAmplitudeParams { beta_min, kappa, phi: 0.0 }
}

fn steps(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn snr_axis() -> Vec<f64> {
    vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
}

/// Configs for figure `id` on the paper-scale or the desk-scale setup.
pub fn figure_configs(id: FigureId, fast: bool) -> Vec<FigureJob> {
    let base = if fast { ExperimentConfig::fast() } else { ExperimentConfig::paper() };
    let with = |z: RisAmplitudeParams, var: SweepVariable, values: Vec<f64>, snrs: Vec<f64>| {
        let mut c = base.clone();
        c.scene.zeta = z;
        c.sweep.variable = var;
        c.sweep.values = values;
        c.sweep.snr_db = snrs;
        c
    };
    match id {
        FigureId::BetaCurves => vec![FigureJob::BetaCurves(vec![zeta(0.3, 1.5), zeta(0.6, 1.5), zeta(0.9, 1.5)])],
        FigureId::BoundsVsBetaMin => {
            vec![FigureJob::Bounds(with(
                zeta(0.5, 1.5),
                SweepVariable::BetaMin,
                steps(0.0, 1.0, 11),
                vec![20.0, 30.0, 40.0],
            ))]
        }
        FigureId::BoundsVsKappa => {
            vec![FigureJob::Bounds(with(
                zeta(0.7, 1.5),
                SweepVariable::Kappa,
                steps(0.0, 2.0, 21),
                vec![20.0, 30.0, 40.0],
            ))]
        }
        FigureId::BoundsVsElements => {
            let sides: Vec<f64> =
                if fast { vec![12.0, 14.0, 16.0, 18.0, 20.0] } else { (30..=65).step_by(5).map(f64::from).collect() };
            let m: Vec<f64> = sides.iter().map(|s| s * s).collect();
            [0.3, 0.7]
                .iter()
                .map(|&b| FigureJob::Bounds(with(zeta(b, 1.5), SweepVariable::Elements, m.clone(), vec![20.0])))
                .collect()
        }
        FigureId::RmseVsSnr => vec![FigureJob::Rmse(with(zeta(0.5, 1.5), SweepVariable::Snr, snr_axis(), vec![]))],
        FigureId::BiasVsSnr => [0.5, 0.7]
            .iter()
            .map(|&b| {
                let mut c = with(zeta(b, 1.5), SweepVariable::Snr, snr_axis(), vec![]);
                c.run.scenarios = vec![Scenario::I];
                FigureJob::Rmse(c)
            })
            .collect(),
        FigureId::RmseVsKappa => {
            vec![FigureJob::Rmse(with(zeta(0.7, 1.5), SweepVariable::Kappa, steps(0.0, 2.0, 11), vec![30.0]))]
        }
        FigureId::RmseVsBetaMin => {
            vec![FigureJob::Rmse(with(zeta(0.5, 1.5), SweepVariable::BetaMin, steps(0.0, 1.0, 11), vec![30.0]))]
        }
        FigureId::CalibrationIterations => {
            let mut c = with(zeta(0.5, 1.5), SweepVariable::None, vec![], vec![10.0, 20.0, 30.0, 40.0]);
            c.estimator.calibration_iterations = 10;
            vec![FigureJob::Calibration(c)]
        }
        FigureId::RmseVsSnrT10 => {
            let mut c = with(zeta(0.7, 1.5), SweepVariable::Snr, snr_axis(), vec![]);
            c.scene.transmissions = 10;
            vec![FigureJob::Rmse(c)]
        }
    }
}
