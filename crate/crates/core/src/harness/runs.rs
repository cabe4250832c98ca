use std::f64::consts::TAU;

use super::{
    derive_seed, rmse_with_se, BetaCurveRow, CalibrationRow, ExperimentConfig, ResultRow, RunOutput, Stream, SweepPoint,
};
use crate::bounds::{fim, mcrb_matrices, pseudo_true, PseudoTrueResult, Scenario};
use crate::estimators::{AmlEstimator, AmmlEstimator, EstimationResult};
use crate::geometry::RisGeometry;
use crate::par;
use crate::ris_model::{beta, profile_matrix, PhaseSchedule, RisAmplitudeParams};
use crate::signal::{noiseless_mean, observe_seeded, solve_noise_for_snr, ParamVector};
use crate::{CVector, Error, Result};

/// Bound values of one schedule at one SNR.
#[derive(Clone, Copy, Debug, Default)]
struct BoundValues {
    lb: f64,
    mcrb: f64,
    bias: f64,
    crb: f64,
}

type Outcome<T> = std::result::Result<T, (String, bool)>;

/// Squared position error and objective value per calibration iteration.
type IterationErrors = Vec<(f64, Option<f64>)>;

fn fail<T>(e: Error) -> Outcome<T> {
    let numerical = e.is_numerical();
    Err((e.to_string(), numerical))
}

/// Tally of one output row.
#[derive(Default)]
struct Tally {
    ok: Vec<f64>,
    failures: usize,
    first_error: Option<(String, bool)>,
}

impl Tally {
    fn push(&mut self, r: &Outcome<f64>) {
        match r {
            Ok(v) => self.ok.push(*v),
            Err(e) => {
                self.failures += 1;
                if self.first_error.is_none() {
                    self.first_error = Some(e.clone());
                }
            }
        }
    }
}

struct Bookkeeping {
    attempted: usize,
    failures: usize,
    first_error: Option<String>,
    numerical_failure: bool,
}

impl Bookkeeping {
    fn new() -> Self {
        Self { attempted: 0, failures: 0, first_error: None, numerical_failure: false }
    }

    fn absorb(&mut self, t: &Tally) {
        self.attempted += t.ok.len() + t.failures;
        self.failures += t.failures;
        if let Some((msg, numerical)) = &t.first_error {
            if self.first_error.is_none() {
                self.first_error = Some(msg.clone());
            }
            if t.ok.is_empty() && *numerical {
                self.numerical_failure = true;
            }
        }
    }

    fn finish<R>(self, rows: Vec<R>, config_hash: String) -> RunOutput<R> {
        RunOutput {
            rows,
            config_hash,
            attempted: self.attempted,
            failures: self.failures,
            first_error: self.first_error,
            numerical_failure: self.numerical_failure,
        }
    }
}

fn schedule(cfg: &ExperimentConfig, p: &SweepPoint, index: usize) -> Result<PhaseSchedule> {
    PhaseSchedule::random(p.elements(), p.transmissions, derive_seed(cfg.run.seed, Stream::Schedule, index as u64, 0))
}

fn base_row(
    cfg: &ExperimentConfig,
    hash: &str,
    p: &SweepPoint,
    snr: f64,
    scenario: Scenario,
    estimator: &str,
) -> ResultRow {
    ResultRow {
        config_hash: hash.to_string(),
        sweep: cfg.sweep.variable.name().to_string(),
        value: (!p.value.is_nan()).then_some(p.value),
        snr_db: snr,
        elements: p.elements(),
        transmissions: p.transmissions,
        beta_min: p.zeta.beta_min,
        kappa: p.zeta.kappa,
        phi: p.zeta.phi,
        scenario: scenario.to_string(),
        estimator: estimator.to_string(),
        rmse: None,
        rmse_se: None,
        count: 0,
        failures: 0,
        lb: None,
        mcrb: None,
        bias: None,
        crb: None,
    }
}

fn scenario_slot(s: Scenario) -> usize {
    match s {
        Scenario::I => 0,
        Scenario::II => 1,
        Scenario::III => 2,
    }
}

/// Bounds of schedule `index` at every SNR of the point, per scenario slot.
fn schedule_bounds(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    geom: &RisGeometry,
    index: usize,
) -> Vec<[Option<Outcome<BoundValues>>; 3]> {
    let want = |s| cfg.run.scenarios.contains(&s);
    let empty = || vec![[None, None, None]; p.snr_db.len()];
    let s = match schedule(cfg, p, index) {
        Ok(s) => s,
        Err(e) => {
            let err = fail::<BoundValues>(e).unwrap_err();
            return p
                .snr_db
                .iter()
                .map(|_| {
                    let mut slots: [Option<Outcome<BoundValues>>; 3] = [None, None, None];
                    for sc in &cfg.run.scenarios {
                        slots[scenario_slot(*sc)] = Some(Err(err.clone()));
                    }
                    slots
                })
                .collect();
        }
    };
    let (gain, ue, bs, es) = (cfg.gain(), cfg.ue(), cfg.bs(), cfg.scene.symbol_energy);
    let tw = profile_matrix(&s, &p.zeta, false);
    let iw = profile_matrix(&s, &p.zeta, true);
    let pt: Option<Outcome<PseudoTrueResult>> = want(Scenario::I).then(|| {
        let solver = cfg.solver_config(derive_seed(cfg.run.seed, Stream::Solver, index as u64, p.index as u64));
        pseudo_true(gain, &ue, &tw, &iw, geom, &bs, es, &solver).or_else(fail)
    });
    let truth = ParamVector::new(gain, ue);
    let mut out = empty();
    for (k, &snr) in p.snr_db.iter().enumerate() {
        let n0 = match solve_noise_for_snr(snr, gain, &ue, &tw, geom, &bs, es) {
            Ok(n) => n,
            Err(e) => {
                let err = fail::<BoundValues>(e).unwrap_err();
                for sc in &cfg.run.scenarios {
                    out[k][scenario_slot(*sc)] = Some(Err(err.clone()));
                }
                continue;
            }
        };
        if let Some(pt) = &pt {
            out[k][0] = Some(match pt {
                Ok(pt) => mcrb_matrices(&pt.eta0, &truth, &tw, &iw, geom, &bs, es, n0)
                    .map(|r| BoundValues { lb: r.pos_rmse_bound, mcrb: r.mcrb_pos_rmse, bias: r.bias_norm, crb: 0.0 })
                    .or_else(fail),
                Err(e) => Err(e.clone()),
            });
        }
        for sc in [Scenario::II, Scenario::III] {
            if want(sc) {
                out[k][scenario_slot(sc)] = Some(
                    fim(gain, &ue, &s, &p.zeta, geom, &bs, es, n0, sc)
                        .map(|f| BoundValues { crb: f.crb_pos_rmse, ..Default::default() })
                        .or_else(fail),
                );
            }
        }
    }
    out
}

/// Bound values averaged over schedules.
struct PooledBounds {
    values: Option<BoundValues>,
    tally: Tally,
}

fn pool(items: &[Option<Outcome<BoundValues>>]) -> PooledBounds {
    let mut tally = Tally::default();
    let mut acc = BoundValues::default();
    for it in items.iter().flatten() {
        match it {
            Ok(b) => {
                acc.lb += b.lb;
                acc.mcrb += b.mcrb;
                acc.bias += b.bias;
                acc.crb += b.crb;
                tally.push(&Ok(0.0));
            }
            Err(e) => tally.push(&Err(e.clone())),
        }
    }
    let n = tally.ok.len() as f64;
    let values =
        (n > 0.0).then(|| BoundValues { lb: acc.lb / n, mcrb: acc.mcrb / n, bias: acc.bias / n, crb: acc.crb / n });
    PooledBounds { values, tally }
}

/// Bounds pooled over `schedules`, indexed `[snr][slot]`.
fn pooled_bounds(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    geom: &RisGeometry,
    schedules: usize,
) -> Vec<[PooledBounds; 3]> {
    let per = par::map_indexed(schedules, cfg.run.parallel, |i| schedule_bounds(cfg, p, geom, i));
    (0..p.snr_db.len())
        .map(|k| {
            let slot = |j: usize| pool(&per.iter().map(|r| r[k][j].clone()).collect::<Vec<_>>());
            [slot(0), slot(1), slot(2)]
        })
        .collect()
}

fn fill_bounds(row: &mut ResultRow, scenario: Scenario, b: &BoundValues) {
    if scenario == Scenario::I {
        row.lb = Some(b.lb);
        row.mcrb = Some(b.mcrb);
        row.bias = Some(b.bias);
    } else {
        row.crb = Some(b.crb);
    }
}

/// LB/MCRB/bias (Scenario I) and CRBs (II, III) per sweep point and SNR,
/// averaged over `profile_realizations` schedules.
pub fn run_bounds_sweep(cfg: &ExperimentConfig) -> Result<RunOutput<ResultRow>> {
    cfg.validate()?;
    let hash = cfg.content_hash();
    let mut rows = Vec::new();
    let mut book = Bookkeeping::new();
    for p in cfg.points()? {
        let geom = cfg.build_geometry(&p)?;
        let pooled = pooled_bounds(cfg, &p, &geom, cfg.run.profile_realizations);
        for (k, &snr) in p.snr_db.iter().enumerate() {
            for &sc in &cfg.run.scenarios {
                let pb = &pooled[k][scenario_slot(sc)];
                let mut row = base_row(cfg, &hash, &p, snr, sc, "bound");
                row.count = pb.tally.ok.len();
                row.failures = pb.tally.failures;
                if let Some(b) = &pb.values {
                    fill_bounds(&mut row, sc, b);
                }
                book.absorb(&pb.tally);
                rows.push(row);
            }
        }
    }
    Ok(book.finish(rows, hash))
}

/// Estimators built for one schedule.
struct ScheduleEstimators {
    schedule: PhaseSchedule,
    aml: Option<AmlEstimator>,
    known: Option<AmmlEstimator>,
}

impl ScheduleEstimators {
    fn new(cfg: &ExperimentConfig, p: &SweepPoint, geom: &RisGeometry, index: usize) -> Result<Self> {
        let s = schedule(cfg, p, index)?;
        let want = |sc| cfg.run.scenarios.contains(&sc);
        let (bs, es) = (cfg.bs(), cfg.scene.symbol_energy);
        let aml = if want(Scenario::I) || want(Scenario::II) {
            Some(AmlEstimator::new(geom, &bs, &s, es, cfg.aml_config(geom)?)?)
        } else {
            None
        };
        let known = if want(Scenario::III) {
            Some(AmmlEstimator::new(geom, &bs, &s, &p.zeta, false, es, cfg.amml_config(geom)?)?)
        } else {
            None
        };
        Ok(Self { schedule: s, aml, known })
    }

    /// Squared position errors per scenario slot.
    fn run(&self, y: &CVector, cfg: &ExperimentConfig) -> [Option<Outcome<f64>>; 3] {
        let ue = cfg.ue();
        let err = |r: &EstimationResult| (r.position - ue).norm_squared();
        let want = |sc| cfg.run.scenarios.contains(&sc);
        let mut out: [Option<Outcome<f64>>; 3] = [None, None, None];
        if let Some(aml) = &self.aml {
            let initial = aml.unit_amplitude().estimate(y);
            if want(Scenario::I) {
                out[0] = Some(initial.as_ref().map(err).map_err(|e| (e.to_string(), e.is_numerical())));
            }
            if want(Scenario::II) {
                out[1] = Some(match initial {
                    Ok(init) => aml.refine(y, init).map(|o| err(&o.estimate)).or_else(fail),
                    Err(e) => fail(e),
                });
            }
        }
        if let Some(k) = &self.known {
            out[2] = Some(k.estimate(y).map(|r| err(&r)).or_else(fail));
        }
        out
    }
}

fn observation(
    cfg: &ExperimentConfig,
    p: &SweepPoint,
    geom: &RisGeometry,
    s: &PhaseSchedule,
    snr: f64,
    seed: u64,
) -> Result<CVector> {
    let (gain, ue, bs, es) = (cfg.gain(), cfg.ue(), cfg.bs(), cfg.scene.symbol_energy);
    let w = profile_matrix(s, &p.zeta, false);
    let mu = noiseless_mean(gain, &ue, &w, geom, &bs, es)?;
    let n0 = solve_noise_for_snr(snr, gain, &ue, &w, geom, &bs, es)?;
    Ok(observe_seeded(&mu, n0, es, seed)?.vector())
}

/// Monte Carlo RMSE of AMML (Scenario I), AML (II) and AML with the true
/// amplitude model (III), joined with the matching bounds.
///
/// With a fixed schedule every trial and the bounds use schedule 0; with
/// `regenerate_schedule` trial `t` uses schedule `t` and the bounds pool the
/// first `profile_realizations` of them.
pub fn run_rmse_sweep(cfg: &ExperimentConfig) -> Result<RunOutput<ResultRow>> {
    cfg.validate()?;
    let hash = cfg.content_hash();
    let trials = cfg.run.trials;
    let mut rows = Vec::new();
    let mut book = Bookkeeping::new();
    let mut flat = 0u64;
    for p in cfg.points()? {
        let geom = cfg.build_geometry(&p)?;
        let n_bounds = if cfg.run.regenerate_schedule { cfg.run.profile_realizations.min(trials) } else { 1 };
        let bounds = pooled_bounds(cfg, &p, &geom, n_bounds);
        let fixed = if cfg.run.regenerate_schedule { None } else { Some(ScheduleEstimators::new(cfg, &p, &geom, 0)?) };
        for (k, &snr) in p.snr_db.iter().enumerate() {
            let sweep_index = flat;
            flat += 1;
            let per_trial = par::map_indexed(trials, cfg.run.parallel, |t| {
                let own;
                let est = match &fixed {
                    Some(e) => e,
                    None => match ScheduleEstimators::new(cfg, &p, &geom, t) {
                        Ok(e) => {
                            own = e;
                            &own
                        }
                        Err(e) => return all_failed(cfg, e),
                    },
                };
                let seed = derive_seed(cfg.run.seed, Stream::Noise, sweep_index, t as u64);
                match observation(cfg, &p, &geom, &est.schedule, snr, seed) {
                    Ok(y) => est.run(&y, cfg),
                    Err(e) => all_failed(cfg, e),
                }
            });
            for &sc in &cfg.run.scenarios {
                let slot = scenario_slot(sc);
                let mut tally = Tally::default();
                for r in per_trial.iter().filter_map(|r| r[slot].as_ref()) {
                    tally.push(r);
                }
                let name = match sc {
                    Scenario::I => "amml",
                    Scenario::II => "aml",
                    Scenario::III => "aml-known",
                };
                let mut row = base_row(cfg, &hash, &p, snr, sc, name);
                if let Some((r, se)) = rmse_with_se(&tally.ok) {
                    row.rmse = Some(r);
                    row.rmse_se = Some(se);
                }
                row.count = tally.ok.len();
                row.failures = tally.failures;
                if let Some(b) = &bounds[k][slot].values {
                    fill_bounds(&mut row, sc, b);
                }
                book.absorb(&tally);
                rows.push(row);
            }
        }
    }
    Ok(book.finish(rows, hash))
}

fn all_failed(cfg: &ExperimentConfig, e: Error) -> [Option<Outcome<f64>>; 3] {
    let err = (e.to_string(), e.is_numerical());
    let mut out: [Option<Outcome<f64>>; 3] = [None, None, None];
    for sc in &cfg.run.scenarios {
        out[scenario_slot(*sc)] = Some(Err(err.clone()));
    }
    out
}

/// Position error after each calibration sweep of AML, pooled over trials.
///
/// Iteration 0 is the unit-amplitude estimate; iteration `j + 1` localizes
/// with the amplitude model held after `j` calibration sweeps (`j = 0` is
/// the initial guess). Trials that stop early repeat their last value.
pub fn run_calibration_demo(cfg: &ExperimentConfig) -> Result<RunOutput<CalibrationRow>> {
    cfg.validate()?;
    let hash = cfg.content_hash();
    let trials = cfg.run.trials;
    let iterations = cfg.estimator.calibration_iterations + 2;
    let mut rows = Vec::new();
    let mut book = Bookkeeping::new();
    let mut flat = 0u64;
    for p in cfg.points()? {
        let geom = cfg.build_geometry(&p)?;
        let s = schedule(cfg, &p, 0)?;
        let aml = AmlEstimator::new(&geom, &cfg.bs(), &s, cfg.scene.symbol_energy, cfg.aml_config(&geom)?)?;
        let ue = cfg.ue();
        for &snr in &p.snr_db {
            let sweep_index = flat;
            flat += 1;
            let per_trial: Vec<Outcome<IterationErrors>> = par::map_indexed(trials, cfg.run.parallel, |t| {
                let seed = derive_seed(cfg.run.seed, Stream::Noise, sweep_index, t as u64);
                let run = || -> Result<IterationErrors> {
                    let y = observation(cfg, &p, &geom, &s, snr, seed)?;
                    let init = aml.unit_amplitude().estimate(&y)?;
                    let cal = aml.calibrate(&y, &init.position)?;
                    let mut out = vec![((init.position - ue).norm_squared(), None)];
                    for (z, v) in cal.history.iter().zip(&cal.objective_trace) {
                        let r = aml.localize_with(&y, z)?;
                        out.push(((r.position - ue).norm_squared(), Some(*v)));
                    }
                    while out.len() < iterations {
                        out.push(*out.last().expect("non-empty"));
                    }
                    Ok(out)
                };
                run().or_else(fail)
            });
            for it in 0..iterations {
                let mut tally = Tally::default();
                let mut objectives = Vec::new();
                for r in &per_trial {
                    match r {
                        Ok(v) => {
                            tally.push(&Ok(v[it].0));
                            objectives.extend(v[it].1);
                        }
                        Err(e) => tally.push(&Err(e.clone())),
                    }
                }
                let stats = rmse_with_se(&tally.ok);
                rows.push(CalibrationRow {
                    config_hash: hash.clone(),
                    snr_db: snr,
                    iteration: it,
                    position_rmse: stats.map(|s| s.0),
                    position_se: stats.map(|s| s.1),
                    mean_objective: (!objectives.is_empty())
                        .then(|| objectives.iter().sum::<f64>() / objectives.len() as f64),
                    count: tally.ok.len(),
                    failures: tally.failures,
                });
                if it == 0 {
                    book.absorb(&tally);
                }
            }
        }
    }
    Ok(book.finish(rows, hash))
}

/// `β(θ)` on `points` equally spaced phases over `[0, 2π]` for each model.
pub fn beta_curves(models: &[RisAmplitudeParams], points: usize) -> Vec<BetaCurveRow> {
    let mut rows = Vec::with_capacity(models.len() * points);
    for z in models {
        for i in 0..points {
            let theta = TAU * i as f64 / (points.max(2) - 1) as f64;
            rows.push(BetaCurveRow { theta, beta_min: z.beta_min, kappa: z.kappa, phi: z.phi, beta: beta(theta, z) });
        }
    }
    rows
}
