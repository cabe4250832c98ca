//! Joint localization and online calibration of the RIS amplitude model.

use serde::{Deserialize, Serialize};

use super::amml::{AmmlConfig, AmmlEstimator};
use super::grids::{grid_argmin, zoom_2d, Domain, SearchGrids, ZOOM_FACTOR};
use super::EstimationResult;
use crate::geometry::{RisGeometry, Vec3};
use crate::linalg::single_column_fit;
use crate::par;
use crate::ris_model::{power, power_base, PhaseSchedule, RisAmplitudeParams};
use crate::{CVector, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmlConfig {
    pub amml: AmmlConfig,
    /// Upper end (excluded) of the `κ` grid.
    pub kappa_max: f64,
    /// Calibration sweeps over `(α, β_min, κ/φ)`.
    pub max_iterations: usize,
    pub tol: f64,
}

impl AmlConfig {
    pub fn new(amml: AmmlConfig) -> Self {
        Self { amml, kappa_max: 5.0, max_iterations: 5, tol: 1e-6 }
    }
}

/// Calibration objective `‖y − α·Υ(ζ)‖` at a fixed position, with
/// `Υ(ζ) = β_min·c₀ + (1 − β_min)·v(κ, φ)`, `c₀` the unit-amplitude signature
/// and `v = Γ̃₂ᵀa(p)√E_s`.
pub struct CalibrationModel {
    t: usize,
    m: usize,
    c0: CVector,
    /// `√E_s·a_m(p)·a_m(p_BS)·e^{jθ}`, transmission major.
    s: Vec<C64>,
    /// Phases, transmission major.
    theta: Vec<f64>,
    kappas: Vec<f64>,
    phis: Vec<f64>,
    kappa_step: f64,
    phi_step: f64,
    kappa_max: f64,
    /// `v` on the `(κ, φ)` grid, `κ` major.
    table: Vec<CVector>,
    parallel: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaUpdate {
    pub value: f64,
    /// `ω = 0`: every `β_min` fits equally well.
    pub degenerate: bool,
}

impl CalibrationModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        geom: &RisGeometry,
        p_bs: &Vec3,
        schedule: &PhaseSchedule,
        position: &Vec3,
        symbol_energy: f64,
        grids: &SearchGrids,
        kappa_max: f64,
        parallel: bool,
    ) -> Result<Self> {
        if schedule.elements() != geom.len() {
            return Err(Error::Dimension("schedule rows must equal the element count".into()));
        }
        if !(kappa_max > 0.0) {
            return Err(Error::InvalidParameter("kappa_max must be positive".into()));
        }
        let a = geom.near_field_steering(position)?;
        let a_bs = geom.near_field_steering(p_bs)?;
        let (m, t) = (geom.len(), schedule.transmissions());
        let ph = schedule.phases();
        let se = symbol_energy.sqrt();
        let mut s = Vec::with_capacity(m * t);
        let mut theta = Vec::with_capacity(m * t);
        for ti in 0..t {
            for mi in 0..m {
                let th = ph[(mi, ti)];
                theta.push(th);
                s.push(a[mi] * a_bs[mi] * C64::from_polar(se, th));
            }
        }
        let c0 = CVector::from_iterator(t, (0..t).map(|ti| s[ti * m..(ti + 1) * m].iter().sum()));
        let mut model = Self {
            t,
            m,
            c0,
            s,
            theta,
            kappas: grids.kappas(kappa_max),
            phis: grids.calib_phis(),
            kappa_step: grids.kappa_step(kappa_max),
            phi_step: grids.calib_phi_step(),
            kappa_max,
            table: Vec::new(),
            parallel,
        };
        model.table = model.build_table();
        Ok(model)
    }

    /// `v` for every grid `φ`, stepping `κ` by repeated multiplication.
    fn build_table(&self) -> Vec<CVector> {
        let l = self.kappas.len();
        let per_phi = par::map_slice(&self.phis, self.parallel, |&phi| {
            let mut out = vec![CVector::zeros(self.t); l];
            let mut acc = vec![C64::new(0.0, 0.0); l];
            for ti in 0..self.t {
                acc.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                for mi in 0..self.m {
                    let i = ti * self.m + mi;
                    let base = power(power_base(self.theta[i], phi), self.kappa_step);
                    let mut cur = 1.0;
                    for a in acc.iter_mut() {
                        *a += self.s[i] * cur;
                        cur *= base;
                    }
                }
                for (o, a) in out.iter_mut().zip(&acc) {
                    o[ti] = *a;
                }
            }
            out
        });
        let mut table = Vec::with_capacity(l * self.phis.len());
        for li in 0..l {
            for col in &per_phi {
                table.push(col[li].clone());
            }
        }
        table
    }

    pub fn c0(&self) -> &CVector {
        &self.c0
    }

    /// `v(κ, φ)` evaluated directly.
    pub fn v(&self, kappa: f64, phi: f64) -> CVector {
        CVector::from_iterator(
            self.t,
            (0..self.t).map(|ti| {
                (0..self.m)
                    .map(|mi| {
                        let i = ti * self.m + mi;
                        self.s[i] * power(power_base(self.theta[i], phi), kappa)
                    })
                    .sum::<C64>()
            }),
        )
    }

    pub fn upsilon(&self, zeta: &RisAmplitudeParams) -> CVector {
        let b = zeta.beta_min;
        &self.c0 * C64::new(b, 0.0) + self.v(zeta.kappa, zeta.phi) * C64::new(1.0 - b, 0.0)
    }

    pub fn objective(&self, y: &CVector, gain: C64, zeta: &RisAmplitudeParams) -> f64 {
        (y - self.upsilon(zeta) * gain).norm()
    }

    /// Least-squares gain for a fixed amplitude model.
    pub fn alpha_update(&self, y: &CVector, zeta: &RisAmplitudeParams) -> Result<C64> {
        Ok(single_column_fit(self.upsilon(zeta).as_slice(), y.as_slice())?.0)
    }

    /// Best `β_min ∈ [0, 1]` among `{0, 1, Re{ωᴴz}/ωᴴω}` with `z = y − αv`
    /// and `ω = α(c₀ − v)`.
    pub fn beta_min_update(&self, y: &CVector, gain: C64, kappa: f64, phi: f64) -> BetaUpdate {
        beta_candidates(y, gain, &self.c0, &self.v(kappa, phi))
    }

    /// Grid search over `(κ, φ)` with one zoom. An incumbent is kept unless
    /// strictly beaten.
    pub fn kappa_phi_update(
        &self,
        y: &CVector,
        gain: C64,
        beta_min: f64,
        incumbent: Option<((f64, f64), f64)>,
    ) -> ((f64, f64), f64) {
        let z = y - &self.c0 * (gain * beta_min);
        let coef = gain * (1.0 - beta_min);
        let idx: Vec<usize> = (0..self.table.len()).collect();
        let l = self.phis.len();
        let (i, mut val) = grid_argmin(&idx, self.parallel, |&i| (&z - &self.table[i] * coef).norm())
            .expect("calibration grid is never empty");
        let mut best = (self.kappas[i / l], self.phis[i % l]);
        let f = |k: f64, p: f64| (&z - self.v(k, p) * coef).norm();
        let steps = (self.kappa_step / ZOOM_FACTOR, self.phi_step / ZOOM_FACTOR);
        let domains = (Domain::Interval(0.0, self.kappa_max), Domain::Periodic);
        if let Some((b, v)) = zoom_2d(best, steps, domains, self.parallel, &f) {
            if v < val {
                best = b;
                val = v;
            }
        }
        match incumbent {
            Some(inc) if !(val < inc.1) => inc,
            _ => (best, val),
        }
    }

    /// Starting point: for each grid `(κ, φ)` fit `y ≈ u·c₀ + w·v`, read off
    /// `α = u + w` and `β_min = Re{u/α}` clipped to `[0, 1]`, refit `α`, and
    /// keep the grid point with the smallest objective.
    pub fn initial_guess(&self, y: &CVector) -> Result<(RisAmplitudeParams, C64, f64)> {
        let idx: Vec<usize> = (0..self.table.len()).collect();
        let l = self.phis.len();
        let fits = par::map_slice(&idx, self.parallel, |&i| {
            let v = &self.table[i];
            let beta = two_column_beta(&self.c0, v, y);
            let ups = &self.c0 * C64::new(beta, 0.0) + v * C64::new(1.0 - beta, 0.0);
            match single_column_fit(ups.as_slice(), y.as_slice()) {
                Ok((a, _)) => (beta, a, (y - ups * a).norm()),
                Err(_) => (beta, C64::new(0.0, 0.0), f64::INFINITY),
            }
        });
        let vals: Vec<f64> = fits.iter().map(|f| f.2).collect();
        let i = par::argmin_first(&vals)
            .filter(|&i| vals[i].is_finite())
            .ok_or_else(|| Error::DegenerateSignal("no calibration grid point fits the observation".into()))?;
        let (beta, gain, val) = fits[i];
        let zeta = RisAmplitudeParams { beta_min: beta, kappa: self.kappas[i / l], phi: self.phis[i % l] };
        Ok((zeta, gain, val))
    }
}

fn beta_candidates(y: &CVector, gain: C64, c0: &CVector, v: &CVector) -> BetaUpdate {
    let z = y - v * gain;
    let w = (c0 - v) * gain;
    let ww = w.norm_squared();
    if !(ww > f64::MIN_POSITIVE * y.norm_squared().max(1.0)) {
        return BetaUpdate { value: 1.0, degenerate: true };
    }
    let stationary = w.dotc(&z).re / ww;
    let mut cands = vec![0.0, 1.0];
    if (0.0..=1.0).contains(&stationary) {
        cands.push(stationary);
    }
    let vals: Vec<f64> = cands.iter().map(|&b| (&z - &w * C64::new(b, 0.0)).norm()).collect();
    let i = par::argmin_first(&vals).unwrap_or(1);
    BetaUpdate { value: cands[i], degenerate: false }
}

fn two_column_beta(c0: &CVector, v: &CVector, y: &CVector) -> f64 {
    let g00 = c0.norm_squared();
    let g11 = v.norm_squared();
    let g01 = c0.dotc(v);
    let det = g00 * g11 - g01.norm_sqr();
    if !(det > 1e-12 * g00 * g11) {
        return 1.0;
    }
    let r0 = c0.dotc(y);
    let r1 = v.dotc(y);
    let u = (r0 * g11 - g01 * r1) / det;
    let w = (r1 * g00 - g01.conj() * r0) / det;
    let s = u + w;
    if s.norm() == 0.0 {
        return 1.0;
    }
    (u / s).re.clamp(0.0, 1.0)
}

/// Step-1 output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub zeta: RisAmplitudeParams,
    pub gain: C64,
    /// Objective after the initial guess and after every sweep.
    pub objective_trace: Vec<f64>,
    /// Amplitude model after the initial guess and after every sweep.
    pub history: Vec<RisAmplitudeParams>,
    pub degenerate_beta: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmlOutcome {
    /// Final estimate under the calibrated model.
    pub estimate: EstimationResult,
    /// Unit-amplitude estimate used to start calibration.
    pub initial: EstimationResult,
    pub calibration: Calibration,
}

/// AML for one schedule. The unit-amplitude estimator is shared by every
/// observation; the calibrated one is rebuilt per observation.
pub struct AmlEstimator {
    geom: RisGeometry,
    p_bs: Vec3,
    schedule: PhaseSchedule,
    symbol_energy: f64,
    cfg: AmlConfig,
    ideal: AmmlEstimator,
}

impl AmlEstimator {
    pub fn new(
        geom: &RisGeometry,
        p_bs: &Vec3,
        schedule: &PhaseSchedule,
        symbol_energy: f64,
        cfg: AmlConfig,
    ) -> Result<Self> {
        if !(cfg.kappa_max > 0.0) {
            return Err(Error::InvalidParameter("kappa_max must be positive".into()));
        }
        let ideal =
            AmmlEstimator::new(geom, p_bs, schedule, &RisAmplitudeParams::IDEAL, true, symbol_energy, cfg.amml)?;
        Ok(Self { geom: geom.clone(), p_bs: *p_bs, schedule: schedule.clone(), symbol_energy, cfg, ideal })
    }

    pub fn unit_amplitude(&self) -> &AmmlEstimator {
        &self.ideal
    }

    /// Alternate gain, `β_min` and `(κ, φ)` updates at a fixed position.
    pub fn calibrate(&self, y: &CVector, position: &Vec3) -> Result<Calibration> {
        let model = CalibrationModel::new(
            &self.geom,
            &self.p_bs,
            &self.schedule,
            position,
            self.symbol_energy,
            &self.cfg.amml.grids,
            self.cfg.kappa_max,
            self.cfg.amml.parallel,
        )?;
        let (mut zeta, mut gain, mut val) = model.initial_guess(y)?;
        let mut trace = vec![val];
        let mut history = vec![zeta];
        let mut degenerate = false;
        for _ in 0..self.cfg.max_iterations {
            let (last_zeta, last_gain) = (zeta, gain);
            gain = model.alpha_update(y, &zeta)?;
            let b = model.beta_min_update(y, gain, zeta.kappa, zeta.phi);
            degenerate = b.degenerate;
            if !b.degenerate {
                zeta.beta_min = b.value;
            }
            let inc = ((zeta.kappa, zeta.phi), model.objective(y, gain, &zeta));
            let ((k, p), v) = model.kappa_phi_update(y, gain, zeta.beta_min, Some(inc));
            zeta.kappa = k;
            zeta.phi = p;
            let prev = val;
            if v > prev {
                // keep the previous iterate
                zeta = last_zeta;
                gain = last_gain;
                break;
            }
            val = v;
            trace.push(val);
            history.push(zeta);
            if prev - val <= self.cfg.tol * prev {
                break;
            }
        }
        Ok(Calibration { zeta, gain, objective_trace: trace, history, degenerate_beta: degenerate })
    }

    /// Localize under a given amplitude model.
    pub fn localize_with(&self, y: &CVector, zeta: &RisAmplitudeParams) -> Result<EstimationResult> {
        let est =
            AmmlEstimator::new(&self.geom, &self.p_bs, &self.schedule, zeta, false, self.symbol_energy, self.cfg.amml)?;
        let mut r = est.estimate(y)?;
        r.calibrated_zeta = Some(*zeta);
        Ok(r)
    }

    pub fn estimate(&self, y: &CVector) -> Result<AmlOutcome> {
        let initial = self.ideal.estimate(y)?;
        self.refine(y, initial)
    }

    /// Calibration and relocalization from an existing unit-amplitude estimate.
    pub fn refine(&self, y: &CVector, initial: EstimationResult) -> Result<AmlOutcome> {
        let calibration = self.calibrate(y, &initial.position)?;
        let estimate = self.localize_with(y, &calibration.zeta)?;
        Ok(AmlOutcome { estimate, initial, calibration })
    }
}

/// AML on one observation. With `known` set, calibration is skipped and the
/// given model is used directly.
pub fn aml(
    y: &CVector,
    schedule: &PhaseSchedule,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    cfg: &AmlConfig,
    known: Option<&RisAmplitudeParams>,
) -> Result<EstimationResult> {
    match known {
        Some(z) => AmmlEstimator::new(geom, p_bs, schedule, z, false, symbol_energy, cfg.amml)?.estimate(y),
        None => Ok(AmlEstimator::new(geom, p_bs, schedule, symbol_energy, *cfg)?.estimate(y)?.estimate),
    }
}
