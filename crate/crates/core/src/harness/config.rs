//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{Scenario, SolverConfig};
use crate::estimators::{AmlConfig, AmmlConfig, SearchGrids};
use crate::geometry::{wavelength, RisGeometry, Vec3};
use crate::ris_model::RisAmplitudeParams;
use crate::signal::ChannelGain;
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    pub scene: SceneSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing: f64,
    #[serde(default = "carrier")]
    pub carrier_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub p_bs: [f64; 3],
    pub p_ue: [f64; 3],
    /// Channel gain `[re, im]`.
    #[serde(default = "unit_gain")]
    pub gain: [f64; 2],
    #[serde(default = "one")]
    pub symbol_energy: f64,
    pub transmissions: usize,
    pub zeta: RisAmplitudeParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    #[default]
    None,
    BetaMin,
    Kappa,
    /// Total element count of a square array.
    Elements,
    Snr,
    Transmissions,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::None => "none",
            SweepVariable::BetaMin => "beta_min",
            SweepVariable::Kappa => "kappa",
            SweepVariable::Elements => "elements",
            SweepVariable::Snr => "snr",
            SweepVariable::Transmissions => "transmissions",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub variable: SweepVariable,
    #[serde(default)]
    pub values: Vec<f64>,
    /// SNRs evaluated at every point, unless the sweep is over SNR.
    #[serde(default = "default_snrs")]
    pub snr_db: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { variable: SweepVariable::None, values: Vec::new(), snr_db: default_snrs() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    /// Schedules averaged per bound point.
    #[serde(default = "default_realizations")]
    pub profile_realizations: usize,
    /// Draw a new phase schedule for every Monte Carlo trial.
    #[serde(default)]
    pub regenerate_schedule: bool,
    #[serde(default = "all_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 1,
            profile_realizations: default_realizations(),
            regenerate_schedule: false,
            scenarios: all_scenarios(),
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    /// Jacobi-Anger order `N`.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Smallest `T` for the Jacobi branch; `2N + 1` when unset.
    #[serde(default)]
    pub branch_threshold: Option<usize>,
    /// Distance/angle alternations of AMML.
    #[serde(default = "five")]
    pub max_iterations: usize,
    /// Calibration sweeps of AML.
    #[serde(default = "five")]
    pub calibration_iterations: usize,
    #[serde(default = "default_kappa_max")]
    pub kappa_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub grids: GridSpec,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            order: default_order(),
            branch_threshold: None,
            max_iterations: 5,
            calibration_iterations: 5,
            kappa_max: default_kappa_max(),
            tol: default_tol(),
            grids: GridSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "k_angle")]
    pub k_angle: usize,
    #[serde(default = "k_dist")]
    pub k_dist: usize,
    #[serde(default = "l_calib")]
    pub l_calib: usize,
    #[serde(default = "two")]
    pub refinement_levels: usize,
    /// Distance search range; the Fresnel interval when unset.
    #[serde(default)]
    pub d_range: Option<[f64; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { k_angle: k_angle(), k_dist: k_dist(), l_calib: l_calib(), refinement_levels: 2, d_range: None }
    }
}

/// Pseudo-true search settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "eight")]
    pub n_restarts: usize,
    #[serde(default = "default_radius")]
    pub restart_radius: f64,
    #[serde(default = "default_step")]
    pub initial_step: f64,
    #[serde(default = "default_evals")]
    pub max_evals: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            n_restarts: 8,
            restart_radius: default_radius(),
            initial_step: default_step(),
            max_evals: default_evals(),
        }
    }
}

fn half() -> f64 {
    0.5
}
fn carrier() -> f64 {
    28e9
}
fn unit_gain() -> [f64; 2] {
    [1.0, 0.0]
}
fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn yes() -> bool {
    true
}
fn two() -> usize {
    2
}
fn five() -> usize {
    5
}
fn eight() -> usize {
    8
}
fn default_snrs() -> Vec<f64> {
    vec![20.0, 30.0, 40.0]
}
fn default_trials() -> usize {
    100
}
fn default_realizations() -> usize {
    20
}
fn all_scenarios() -> Vec<Scenario> {
    vec![Scenario::I, Scenario::II, Scenario::III]
}
fn default_order() -> usize {
    50
}
fn default_kappa_max() -> f64 {
    5.0
}
fn default_tol() -> f64 {
    1e-6
}
fn k_angle() -> usize {
    180
}
fn k_dist() -> usize {
    200
}
fn l_calib() -> usize {
    64
}
fn default_radius() -> f64 {
    SolverConfig::default().restart_radius
}
fn default_step() -> f64 {
    SolverConfig::default().initial_step
}
fn default_evals() -> usize {
    SolverConfig::default().max_evals
}

/// One evaluation point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    /// Swept value, `NaN` for a single-point run.
    pub value: f64,
    pub rows: usize,
    pub cols: usize,
    pub zeta: RisAmplitudeParams,
    pub transmissions: usize,
    pub snr_db: Vec<f64>,
}

impl SweepPoint {
    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Paper-scale setup: 50 × 50 half-wavelength UPA at 28 GHz, `T = 200`,
    /// BS 10 m and UE 5 m from the RIS.
    pub fn paper() -> Self {
        Self {
            geometry: GeometrySpec { rows: 50, cols: 50, spacing: 0.5, carrier_hz: 28e9 },
            scene: SceneSpec {
                p_bs: [-5.77, 5.77, 5.77],
                p_ue: [2.89, 2.89, 2.89],
                gain: unit_gain(),
                symbol_energy: 1.0,
                transmissions: 200,
                zeta: RisAmplitudeParams { beta_min: 0.5, kappa: 1.5, phi: 0.0 },
            },
            sweep: SweepSpec::default(),
            run: RunSpec::default(),
            estimator: EstimatorSpec::default(),
            solver: SolverSpec::default(),
        }
    }

    /// Desk-scale setup: 16 × 16 elements, `T = 50`, with UE and BS at the same
    /// fractions of the Fresnel far edge as the paper-scale setup. The series
    /// order sits just above the array's order bound (29.0), so `T < 2N + 1`
    /// and the alternating branch runs.
    pub fn fast() -> Self {
        let mut c = Self::paper();
        c.geometry.rows = 16;
        c.geometry.cols = 16;
        c.scene.transmissions = 50;
        let g = RisGeometry::upa(16, 16, 0.5, wavelength(28e9), Vec3::zeros()).expect("valid geometry");
        let hi = g.fresnel_bounds().expect("aperture").1;
        let s = 1.0 / 3f64.sqrt();
        let ue = 0.187 * hi * s;
        let bs = 0.373 * hi * s;
        c.scene.p_ue = [ue, ue, ue];
        c.scene.p_bs = [-bs, bs, bs];
        c.estimator.order = 30;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let g = &self.geometry;
        if g.rows == 0 || g.cols == 0 {
            return bad("geometry needs at least one row and column".into());
        }
        if !(g.spacing > 0.0 && g.spacing.is_finite()) || !(g.carrier_hz > 0.0 && g.carrier_hz.is_finite()) {
            return bad("spacing and carrier must be positive".into());
        }
        if self.scene.transmissions == 0 {
            return bad("transmissions must be >= 1".into());
        }
        if !(self.scene.symbol_energy > 0.0) {
            return bad("symbol_energy must be positive".into());
        }
        if self.scene.gain[0] == 0.0 && self.scene.gain[1] == 0.0 {
            return bad("gain must be nonzero".into());
        }
        self.scene.zeta.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.run.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.run.profile_realizations == 0 {
            return bad("profile_realizations must be >= 1".into());
        }
        if self.run.scenarios.is_empty() {
            return bad("no scenarios selected".into());
        }
        if self.sweep.variable != SweepVariable::None && self.sweep.values.is_empty() {
            return bad(format!("sweep over {} has no values", self.sweep.variable.name()));
        }
        if self.sweep.variable != SweepVariable::Snr && self.sweep.snr_db.is_empty() {
            return bad("snr_db list is empty".into());
        }
        let e = &self.estimator;
        if e.order == 0 || e.max_iterations == 0 || e.calibration_iterations == 0 {
            return bad("order and iteration limits must be >= 1".into());
        }
        if !(e.kappa_max > 0.0) || !(e.tol >= 0.0) {
            return bad("kappa_max must be positive and tol non-negative".into());
        }
        let pts = self.points()?;
        for p in &pts {
            let geom = self.build_geometry(p)?;
            let s = geom.position_to_spherical(&self.ue()).map_err(|e| Error::Config(e.to_string()))?;
            let (lo, hi) = geom.fresnel_bounds().map_err(|e| Error::Config(e.to_string()))?;
            if s.distance < lo || s.distance > hi {
                return bad(format!(
                    "UE at {:.3} m is outside the Fresnel interval ({lo:.3}, {hi:.3}) of the {}x{} array",
                    s.distance, p.rows, p.cols
                ));
            }
            let bs = self.bs().norm();
            if bs < lo || bs > hi {
                log::warn!(
                    "BS at {bs:.3} m is outside the Fresnel interval ({lo:.3}, {hi:.3}) of the {}x{} array",
                    p.rows,
                    p.cols
                );
            }
            self.grids_for(&geom).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Points in sweep order.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = SweepPoint {
            index: 0,
            value: f64::NAN,
            rows: self.geometry.rows,
            cols: self.geometry.cols,
            zeta: self.scene.zeta,
            transmissions: self.scene.transmissions,
            snr_db: self.sweep.snr_db.clone(),
        };
        if self.sweep.variable == SweepVariable::None {
            return Ok(vec![base]);
        }
        let mut out = Vec::with_capacity(self.sweep.values.len());
        for (index, &v) in self.sweep.values.iter().enumerate() {
            let mut p = SweepPoint { index, value: v, ..base.clone() };
            if !v.is_finite() {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
            match self.sweep.variable {
                SweepVariable::None => unreachable!(),
                SweepVariable::BetaMin => p.zeta.beta_min = v,
                SweepVariable::Kappa => p.zeta.kappa = v,
                SweepVariable::Snr => p.snr_db = vec![v],
                SweepVariable::Elements => {
                    let side = v.sqrt().round();
                    if v < 1.0 || side * side != v {
                        return Err(Error::Config(format!("element count {v} is not a perfect square")));
                    }
                    p.rows = side as usize;
                    p.cols = side as usize;
                }
                SweepVariable::Transmissions => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(Error::Config(format!("transmission count {v} is not a positive integer")));
                    }
                    p.transmissions = v as usize;
                }
            }
            p.zeta.validate().map_err(|e| Error::Config(e.to_string()))?;
            out.push(p);
        }
        Ok(out)
    }

    pub fn build_geometry(&self, p: &SweepPoint) -> Result<RisGeometry> {
        RisGeometry::upa(p.rows, p.cols, self.geometry.spacing, wavelength(self.geometry.carrier_hz), Vec3::zeros())
    }

    pub fn ue(&self) -> Vec3 {
        Vec3::from(self.scene.p_ue)
    }
    pub fn bs(&self) -> Vec3 {
        Vec3::from(self.scene.p_bs)
    }
    pub fn gain(&self) -> ChannelGain {
        C64::new(self.scene.gain[0], self.scene.gain[1])
    }

    pub fn grids_for(&self, geom: &RisGeometry) -> Result<SearchGrids> {
        let g = &self.estimator.grids;
        let range = match g.d_range {
            Some([lo, hi]) => (lo, hi),
            None => geom.fresnel_bounds()?,
        };
        SearchGrids::new(g.k_angle, g.k_dist, g.l_calib, range, g.refinement_levels)
    }

    pub fn amml_config(&self, geom: &RisGeometry) -> Result<AmmlConfig> {
        let e = &self.estimator;
        let mut c = AmmlConfig::new(self.grids_for(geom)?, e.order);
        c.branch_threshold = e.branch_threshold;
        c.max_iterations = e.max_iterations;
        c.tol = e.tol;
        c.parallel = self.run.parallel;
        Ok(c)
    }

    pub fn aml_config(&self, geom: &RisGeometry) -> Result<AmlConfig> {
        let e = &self.estimator;
        let mut c = AmlConfig::new(self.amml_config(geom)?);
        c.kappa_max = e.kappa_max;
        c.max_iterations = e.calibration_iterations;
        c.tol = e.tol;
        Ok(c)
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            n_restarts: self.solver.n_restarts,
            restart_radius: self.solver.restart_radius,
            initial_step: self.solver.initial_step,
            max_evals: self.solver.max_evals,
            seed,
            parallel: self.run.parallel,
            ..SolverConfig::default()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
