//! Randomized property checks, runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{amplitude_derivatives, fim, mcrb_matrices, mean_derivatives, pseudo_true, Scenario};
use crate::estimators::{AmlConfig, AmlEstimator, AmmlConfig, AmmlEstimator, Branch, SearchGrids};
use crate::geometry::{wavelength, RisGeometry, Vec3};
use crate::harness::{run_rmse_sweep, ExperimentConfig};
use crate::ris_model::{beta, profile_matrix, PhaseSchedule, RisAmplitudeParams};
use crate::signal::{noiseless_mean, observe_seeded, solve_noise_for_snr, ParamVector};
use crate::{Result, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Square array at the carrier of `cfg` with UE and BS at the same Fresnel
/// fractions as the reference layout.
pub struct SmallScene {
    pub geom: RisGeometry,
    pub ue: Vec3,
    pub bs: Vec3,
}

impl SmallScene {
    pub fn new(side: usize) -> Result<Self> {
        let geom = RisGeometry::upa(side, side, 0.5, wavelength(28e9), Vec3::zeros())?;
        let hi = geom.fresnel_bounds()?.1;
        let s = 1.0 / 3f64.sqrt();
        Ok(Self {
            ue: Vec3::new(1.0, 1.0, 1.0) * (0.187 * hi * s),
            bs: Vec3::new(-1.0, 1.0, 1.0) * (0.373 * hi * s),
            geom,
        })
    }
}

fn random_zeta<R: Rng>(rng: &mut R) -> RisAmplitudeParams {
    RisAmplitudeParams {
        beta_min: rng.random_range(0.05..0.95),
        kappa: rng.random_range(0.2..3.0),
        phi: rng.random_range(0.0..1.5),
    }
}

/// Largest relative error of the analytic mean derivatives (gain, position
/// and amplitude parameters) against central differences over `points`
/// random parameter draws.
pub fn derivative_errors(geom: &RisGeometry, p_bs: &Vec3, points: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = geom.fresnel_bounds()?;
    let (mut worst_d, mut worst_g) = (0.0f64, 0.0f64);
    let rel = |fd: &crate::CVector, an: &crate::CVector| (fd - an).norm() / an.norm().max(1e-300);
    for _ in 0..points {
        let d = rng.random_range(lo * 1.2..hi * 0.8);
        let el: f64 = rng.random_range(0.2..1.3);
        let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let p = Vec3::new(el.sin() * az.cos(), el.sin() * az.sin(), el.cos()) * d;
        let gain = C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-3.0..3.0));
        let zeta = random_zeta(&mut rng);
        let s = PhaseSchedule::random_with(geom.len(), rng.random_range(4..12), &mut rng)?;
        let w = profile_matrix(&s, &zeta, false);
        let an = mean_derivatives(gain, &p, &w.weights, geom, p_bs, 1.0)?;
        let mean = |g: C64, q: &Vec3| noiseless_mean(g, q, &w, geom, p_bs, 1.0);
        let hg = 1e-6 * gain.norm();
        for (i, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
            let fd = (mean(gain + dir * hg, &p)? - mean(gain - dir * hg, &p)?) / C64::new(2.0 * hg, 0.0);
            worst_d = worst_d.max(rel(&fd, &an.first.column(i).into_owned()));
        }
        let hp = 1e-6 * d;
        for nu in 0..3 {
            let (mut pp, mut pm) = (p, p);
            pp[nu] += hp;
            pm[nu] -= hp;
            let fd = (mean(gain, &pp)? - mean(gain, &pm)?) / C64::new(2.0 * hp, 0.0);
            worst_d = worst_d.max(rel(&fd, &an.first.column(2 + nu).into_owned()));
        }
        let ga = amplitude_derivatives(gain, &p, &s, &zeta, geom, p_bs, 1.0)?;
        for k in 0..3 {
            let h = 1e-6;
            let (mut zp, mut zm) = (zeta, zeta);
            match k {
                0 => {
                    zp.beta_min += h;
                    zm.beta_min -= h;
                }
                1 => {
                    zp.kappa += h;
                    zm.kappa -= h;
                }
                _ => {
                    zp.phi += h;
                    zm.phi -= h;
                }
            }
            let mp = noiseless_mean(gain, &p, &profile_matrix(&s, &zp, false), geom, p_bs, 1.0)?;
            let mm = noiseless_mean(gain, &p, &profile_matrix(&s, &zm, false), geom, p_bs, 1.0)?;
            let fd = (mp - mm) / C64::new(2.0 * h, 0.0);
            worst_g = worst_g.max(rel(&fd, &ga.column(k).into_owned()));
        }
    }
    Ok((worst_d, worst_g))
}

/// Counts of non-increasing objective traces: `(amml_ok, calibration_ok, runs)`.
/// Each run draws an array size, schedule, amplitude model and SNR, then runs
/// the distance/angle alternation and the calibration sweeps.
pub fn monotone_runs(runs: usize, seed: u64, parallel: bool) -> Result<(usize, usize, usize)> {
    let results = crate::par::map_indexed(runs, parallel, |i| -> Result<(bool, bool)> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(crate::harness::derive_seed(seed, crate::harness::Stream::Schedule, i as u64, 7));
        let side = rng.random_range(3..=5);
        let sc = SmallScene::new(side)?;
        let m = side * side;
        let t = rng.random_range(m..=2 * m);
        let s = PhaseSchedule::random_with(m, t, &mut rng)?;
        let zeta = random_zeta(&mut rng);
        let snr = rng.random_range(0.0..40.0);
        let grids = SearchGrids::new(24, 24, 12, sc.geom.fresnel_bounds()?, 1)?;
        let mut cfg = AmmlConfig::new(grids, 4);
        cfg.parallel = false;
        let w = profile_matrix(&s, &zeta, false);
        let gain = C64::new(1.0, 0.0);
        let mu = noiseless_mean(gain, &sc.ue, &w, &sc.geom, &sc.bs, 1.0)?;
        let n0 = solve_noise_for_snr(snr, gain, &sc.ue, &w, &sc.geom, &sc.bs, 1.0)?;
        let y = observe_seeded(&mu, n0, 1.0, rng.random())?.vector();
        let est = AmmlEstimator::new(&sc.geom, &sc.bs, &s, &RisAmplitudeParams::IDEAL, true, 1.0, cfg)?;
        let r = est.estimate_with(&y, Branch::Alternating)?;
        let aml = AmlEstimator::new(&sc.geom, &sc.bs, &s, 1.0, AmlConfig::new(cfg))?;
        let cal = aml.calibrate(&y, &r.position)?;
        Ok((non_increasing(&r.objective_trace), non_increasing(&cal.objective_trace)))
    });
    let mut a = 0;
    let mut c = 0;
    for r in results {
        let (x, y) = r?;
        a += x as usize;
        c += y as usize;
    }
    Ok((a, c, runs))
}

pub fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn guarded(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((p, d)) => check(name, p, d),
        Err(e) => check(name, false, format!("error: {e}")),
    }
}

/// Property suite on the array and layout of `cfg`.
pub fn run_suite(cfg: &ExperimentConfig, seed: u64) -> ValidationReport {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    checks.push(guarded("amplitude model range", || {
        let mut worst = 0.0f64;
        for _ in 0..2000 {
            let z = random_zeta(&mut rng);
            let th: f64 = rng.random_range(-10.0..10.0);
            let b = beta(th, &z);
            let per = beta(th + std::f64::consts::TAU, &z);
            if !(b >= z.beta_min - 1e-12 && b <= 1.0 + 1e-12) {
                return Ok((false, format!("beta({th}) = {b} for {z:?}")));
            }
            worst = worst.max((b - per).abs());
        }
        Ok((worst < 1e-9, format!("max periodicity gap {worst:.2e}")))
    }));

    let point = match cfg.points() {
        Ok(p) => p[0].clone(),
        Err(e) => {
            checks.push(check("config", false, e.to_string()));
            return ValidationReport { checks };
        }
    };
    let setup = || -> Result<_> {
        let geom = cfg.build_geometry(&point)?;
        let s = PhaseSchedule::random(geom.len(), point.transmissions, seed)?;
        Ok((geom, s))
    };
    let (geom, s) = match setup() {
        Ok(v) => v,
        Err(e) => {
            checks.push(check("config", false, e.to_string()));
            return ValidationReport { checks };
        }
    };
    let (gain, ue, bs) = (cfg.gain(), cfg.ue(), cfg.bs());

    checks.push(guarded("steering unit modulus", || {
        let a = geom.near_field_steering(&ue)?;
        let worst = a.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max ||a_m| - 1| = {worst:.2e}")))
    }));

    checks.push(guarded("no-mismatch pseudo-true and MCRB", || {
        let z = RisAmplitudeParams { beta_min: 1.0, ..point.zeta };
        let tw = profile_matrix(&s, &z, false);
        let iw = profile_matrix(&s, &z, true);
        let pt = pseudo_true(gain, &ue, &tw, &iw, &geom, &bs, 1.0, &cfg.solver_config(seed))?;
        let n0 = solve_noise_for_snr(20.0, gain, &ue, &tw, &geom, &bs, 1.0)?;
        let rep = mcrb_matrices(&pt.eta0, &ParamVector::new(gain, ue), &tw, &iw, &geom, &bs, 1.0, n0)?;
        let f = fim(gain, &ue, &s, &z, &geom, &bs, 1.0, n0, Scenario::III)?;
        let err = (pt.eta0.position - ue).norm();
        let rel = (&rep.mcrb - &f.crb).norm() / f.crb.norm();
        Ok((err < 1e-9 && rel < 1e-8, format!("position error {err:.2e} m, MCRB/CRB mismatch {rel:.2e}")))
    }));

    checks.push(guarded("CRB scales with noise", || {
        let w = profile_matrix(&s, &point.zeta, false);
        let n20 = solve_noise_for_snr(20.0, gain, &ue, &w, &geom, &bs, 1.0)?;
        let n30 = solve_noise_for_snr(30.0, gain, &ue, &w, &geom, &bs, 1.0)?;
        let a = fim(gain, &ue, &s, &point.zeta, &geom, &bs, 1.0, n20, Scenario::III)?.crb_pos_rmse;
        let b = fim(gain, &ue, &s, &point.zeta, &geom, &bs, 1.0, n30, Scenario::III)?.crb_pos_rmse;
        let rel = (b / a * 10f64.sqrt() - 1.0).abs();
        Ok((rel < 1e-9, format!("ratio error {rel:.2e}")))
    }));

    checks.push(guarded("derivatives vs finite differences", || {
        let (d, g) = derivative_errors(&geom, &bs, 5, seed)?;
        Ok((d < 1e-5 && g < 1e-5, format!("mean {d:.2e}, amplitude {g:.2e}")))
    }));

    checks.push(guarded("monotone objective traces", || {
        let (a, c, n) = monotone_runs(50, seed, cfg.run.parallel)?;
        Ok((a == n && c == n, format!("alternation {a}/{n}, calibration {c}/{n}")))
    }));

    checks.push(guarded("noiseless AMML recovers the UE", || {
        let w = profile_matrix(&s, &RisAmplitudeParams::IDEAL, true);
        let y = noiseless_mean(gain, &ue, &w, &geom, &bs, 1.0)?;
        let est = AmmlEstimator::new(&geom, &bs, &s, &RisAmplitudeParams::IDEAL, true, 1.0, cfg.amml_config(&geom)?)?;
        let r = est.estimate(&y)?;
        let err = (r.position - ue).norm();
        let g = cfg.grids_for(&geom)?;
        let d = ue.norm();
        let cell =
            (g.distance_step().powi(2) + (d * g.elevation_step()).powi(2) + (d * g.azimuth_step()).powi(2)).sqrt();
        Ok((err < cell, format!("{} branch error {err:.2e} m, coarse cell {cell:.2e} m", r.branch)))
    }));

    checks.push(guarded("identical seeds give identical tables", || {
        let mut c = cfg.clone();
        c.sweep = Default::default();
        c.sweep.snr_db = vec![30.0];
        c.run.trials = 2;
        c.run.profile_realizations = 1;
        c.run.scenarios = vec![Scenario::I];
        let a = run_rmse_sweep(&c)?;
        let b = run_rmse_sweep(&c)?;
        Ok((a.rows == b.rows, format!("{} rows", a.rows.len())))
    }));

    ValidationReport { checks }
}
