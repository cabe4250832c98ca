//! Approximate mismatched maximum-likelihood localization.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::grids::{grid_argmin, search_1d, search_2d, zoom_points, Domain, SearchGrids, ZOOM_FACTOR};
use super::jacobi::{JacobiBasis, JacobiTable};
use super::{Branch, EstimationResult};
use crate::geometry::{RisGeometry, SphericalCoords, Vec3};
use crate::linalg::{single_column_fit, single_column_residual, PivotedQr};
use crate::par;
use crate::ris_model::{profile_matrix, PhaseSchedule, RisAmplitudeParams};
use crate::signal::qtilde_matrix;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Zoom re-centrings per level in the exhaustive search.
const MAX_RECENTRES: usize = 50;

/// Largest far-field table (`K² · T` entries) kept in memory.
const FAR_CACHE_LIMIT: usize = 1 << 23;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmmlConfig {
    pub grids: SearchGrids,
    /// Jacobi-Anger truncation order `N`.
    pub order: usize,
    /// Smallest `T` for the Jacobi branch; `2N + 1` when unset.
    pub branch_threshold: Option<usize>,
    /// Distance/angle alternations.
    pub max_iterations: usize,
    /// Relative objective change that ends the alternation.
    pub tol: f64,
    pub parallel: bool,
}

impl AmmlConfig {
    pub fn new(grids: SearchGrids, order: usize) -> Self {
        Self { grids, order, branch_threshold: None, max_iterations: 5, tol: 1e-6, parallel: true }
    }

    pub fn threshold(&self) -> usize {
        self.branch_threshold.unwrap_or(2 * self.order + 1)
    }
}

struct JacobiCache {
    table: JacobiTable,
    /// Factorisations of `Q̃Gᵀ(ϑ)` on the coarse elevation grid.
    coarse: Vec<Option<PivotedQr>>,
}

/// AMML for one phase schedule and one assumed amplitude model. Holds
/// precomputed tables, so reuse it across observations of the same schedule.
pub struct AmmlEstimator {
    geom: RisGeometry,
    qtilde: CMatrix,
    symbol_energy: f64,
    cfg: AmmlConfig,
    jacobi: OnceLock<JacobiCache>,
    far: OnceLock<Option<Vec<C64>>>,
}

impl AmmlEstimator {
    /// Build `Q̃` from the schedule under the assumed model (`ideal` for unit amplitude).
    pub fn new(
        geom: &RisGeometry,
        p_bs: &Vec3,
        schedule: &PhaseSchedule,
        assumed: &RisAmplitudeParams,
        ideal: bool,
        symbol_energy: f64,
        cfg: AmmlConfig,
    ) -> Result<Self> {
        let w = profile_matrix(schedule, assumed, ideal);
        let q = qtilde_matrix(&w, geom, p_bs)?;
        Self::from_qtilde(geom, q, symbol_energy, cfg)
    }

    pub fn from_qtilde(geom: &RisGeometry, qtilde: CMatrix, symbol_energy: f64, cfg: AmmlConfig) -> Result<Self> {
        cfg.grids.validate()?;
        if qtilde.ncols() != geom.len() {
            return Err(Error::Dimension("Q columns must equal the element count".into()));
        }
        if qtilde.nrows() < 2 {
            return Err(Error::InvalidParameter("at least two transmissions are needed".into()));
        }
        if !(symbol_energy > 0.0) {
            return Err(Error::InvalidParameter("symbol energy must be positive".into()));
        }
        Ok(Self { geom: geom.clone(), qtilde, symbol_energy, cfg, jacobi: OnceLock::new(), far: OnceLock::new() })
    }

    pub fn config(&self) -> &AmmlConfig {
        &self.cfg
    }
    pub fn qtilde(&self) -> &CMatrix {
        &self.qtilde
    }
    pub fn geometry(&self) -> &RisGeometry {
        &self.geom
    }
    pub fn transmissions(&self) -> usize {
        self.qtilde.nrows()
    }

    pub fn branch(&self) -> Branch {
        if self.transmissions() >= self.cfg.threshold() {
            Branch::Jacobi
        } else {
            Branch::Alternating
        }
    }

    /// `c(p) = Q̃ a(p) √E_s`.
    pub fn c_vector(&self, p: &Vec3) -> CVector {
        &self.qtilde * self.geom.near_field_steering_unchecked(p) * C64::new(self.symbol_energy.sqrt(), 0.0)
    }

    /// `‖Π⊥_{c(p)} y‖`; infinite where the projection is undefined.
    pub fn objective(&self, y: &CVector, p: &Vec3) -> f64 {
        let x = &self.qtilde * self.geom.near_field_steering_unchecked(p);
        single_column_residual(x.as_slice(), y.as_slice()).unwrap_or(f64::INFINITY)
    }

    fn objective_at(&self, y: &CVector, d: f64, el: f64, az: f64) -> f64 {
        self.objective(y, &self.geom.position_at(d, el, az))
    }

    fn check(&self, y: &CVector) -> Result<()> {
        if y.len() != self.transmissions() {
            return Err(Error::Dimension(format!(
                "observation has {} samples, expected {}",
                y.len(),
                self.transmissions()
            )));
        }
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("observation has non-finite samples".into()));
        }
        Ok(())
    }

    fn far_table(&self) -> Option<&Vec<C64>> {
        self.far
            .get_or_init(|| {
                let g = &self.cfg.grids;
                let t = self.transmissions();
                if g.k_angle * g.k_angle * t > FAR_CACHE_LIMIT {
                    return None;
                }
                let (els, azs) = (g.elevations(), g.azimuths());
                let cols = par::map_indexed(els.len() * azs.len(), self.cfg.parallel, |i| {
                    let a = self.geom.far_field_steering_unchecked(els[i / azs.len()], azs[i % azs.len()]);
                    (&self.qtilde * a).as_slice().to_vec()
                });
                Some(cols.concat())
            })
            .as_ref()
    }

    fn far_objective(&self, y: &CVector, el: f64, az: f64) -> f64 {
        let x = &self.qtilde * self.geom.far_field_steering_unchecked(el, az);
        single_column_residual(x.as_slice(), y.as_slice()).unwrap_or(f64::INFINITY)
    }

    /// Far-field angle search over the full `(ϑ, φ)` grid plus zooms.
    pub fn coarse_angles(&self, y: &CVector) -> Result<((f64, f64), f64)> {
        self.check(y)?;
        let g = &self.cfg.grids;
        let (els, azs) = (g.elevations(), g.azimuths());
        let t = self.transmissions();
        let start = match self.far_table() {
            Some(table) => {
                let idx: Vec<usize> = (0..els.len() * azs.len()).collect();
                grid_argmin(&idx, self.cfg.parallel, |&i| {
                    single_column_residual(&table[i * t..(i + 1) * t], y.as_slice()).unwrap_or(f64::INFINITY)
                })
                .map(|(i, v)| ((els[i / azs.len()], azs[i % azs.len()]), v))
            }
            None => {
                let pts: Vec<(f64, f64)> = els.iter().flat_map(|&a| azs.iter().map(move |&b| (a, b))).collect();
                grid_argmin(&pts, self.cfg.parallel, |&(a, b)| self.far_objective(y, a, b))
            }
        };
        let (mut best, mut val) = start.ok_or_else(|| Error::NonConvergence("empty angle grid".into()))?;
        let (mut h0, mut h1) = (g.elevation_step(), g.azimuth_step());
        for _ in 0..g.refinement_levels {
            h0 /= ZOOM_FACTOR;
            h1 /= ZOOM_FACTOR;
            let f = |a: f64, b: f64| self.far_objective(y, a, b);
            if let Some((b, v)) = super::grids::zoom_2d(best, (h0, h1), self.angle_domains(), self.cfg.parallel, &f) {
                if v < val {
                    best = b;
                    val = v;
                }
            }
        }
        Ok((best, val))
    }

    fn angle_domains(&self) -> (Domain, Domain) {
        (Domain::Interval(0.0, FRAC_PI_2), Domain::Periodic)
    }

    /// Near-field line search in distance at fixed angles. An incumbent
    /// `(d, objective)` is kept unless strictly beaten.
    pub fn distance_update(&self, y: &CVector, el: f64, az: f64, incumbent: Option<(f64, f64)>) -> Result<(f64, f64)> {
        self.check(y)?;
        let g = &self.cfg.grids;
        let (lo, hi) = g.d_range;
        let found = search_1d(
            &g.distances(),
            g.distance_step(),
            Domain::Interval(lo, hi),
            g.refinement_levels,
            self.cfg.parallel,
            |d| self.objective_at(y, d, el, az),
        )
        .ok_or_else(|| Error::NonConvergence("empty distance grid".into()))?;
        Ok(keep_incumbent(found, incumbent))
    }

    /// Near-field `(ϑ, φ)` search at fixed distance, with the same incumbent rule.
    pub fn angle_update(&self, y: &CVector, d: f64, incumbent: Option<((f64, f64), f64)>) -> Result<((f64, f64), f64)> {
        self.check(y)?;
        let g = &self.cfg.grids;
        let found = search_2d(
            &g.elevations(),
            &g.azimuths(),
            (g.elevation_step(), g.azimuth_step()),
            self.angle_domains(),
            g.refinement_levels,
            self.cfg.parallel,
            |a, b| self.objective_at(y, d, a, b),
        )
        .ok_or_else(|| Error::NonConvergence("empty angle grid".into()))?;
        Ok(keep_incumbent(found, incumbent))
    }

    fn check_jacobi(&self) -> Result<()> {
        let need = 2 * self.cfg.order + 1;
        if self.transmissions() < need {
            return Err(Error::InfeasibleBranch { t: self.transmissions(), required: need });
        }
        Ok(())
    }

    fn jacobi_cache(&self) -> &JacobiCache {
        self.jacobi.get_or_init(|| {
            let table = JacobiTable::new(&self.qtilde, &self.geom, self.cfg.order, self.cfg.parallel);
            let els = self.cfg.grids.elevations();
            let coarse = par::map_slice(&els, self.cfg.parallel, |&el| {
                PivotedQr::truncated(table.rows(), table.columns(), table.design(el)).ok()
            });
            JacobiCache { table, coarse }
        })
    }

    fn jacobi_residual(table: &JacobiTable, y: &CVector, el: f64) -> f64 {
        PivotedQr::truncated(table.rows(), table.columns(), table.design(el))
            .map(|qr| qr.residual_norm(y.as_slice()))
            .unwrap_or(f64::INFINITY)
    }

    /// Elevation line search on `‖Π⊥_{Q̃Gᵀ(ϑ)} y‖`.
    pub fn jacobi_elevation(&self, y: &CVector) -> Result<(f64, f64)> {
        self.check(y)?;
        self.check_jacobi()?;
        let cache = self.jacobi_cache();
        let g = &self.cfg.grids;
        let els = g.elevations();
        let vals: Vec<f64> = par::map_slice(&cache.coarse, self.cfg.parallel, |qr| {
            qr.as_ref().map(|q| q.residual_norm(y.as_slice())).unwrap_or(f64::INFINITY)
        });
        let i = par::argmin_first(&vals).ok_or_else(|| Error::NonConvergence("empty elevation grid".into()))?;
        let (mut best, mut val) = (els[i], vals[i]);
        let mut h = g.elevation_step();
        for _ in 0..g.refinement_levels {
            h /= ZOOM_FACTOR;
            let pts = zoom_points(best, h, Domain::Interval(0.0, FRAC_PI_2));
            if let Some((b, v)) = grid_argmin(&pts, self.cfg.parallel, |&el| Self::jacobi_residual(&cache.table, y, el))
            {
                if v < val {
                    best = b;
                    val = v;
                }
            }
        }
        if !val.is_finite() {
            return Err(Error::DegenerateSignal("no elevation gives a finite residual".into()));
        }
        Ok((best, val))
    }

    /// Azimuth line search on `‖Π⊥_{Q̃Gᵀ(ϑ)h(φ)} y‖` at fixed elevation.
    pub fn jacobi_azimuth(&self, y: &CVector, el: f64) -> Result<(f64, f64)> {
        self.check(y)?;
        self.check_jacobi()?;
        let table = &self.jacobi_cache().table;
        let x = CMatrix::from_column_slice(table.rows(), table.columns(), &table.design(el));
        let order = self.cfg.order;
        let f = |az: f64| {
            let col = &x * JacobiBasis::h(order, az);
            single_column_residual(col.as_slice(), y.as_slice()).unwrap_or(f64::INFINITY)
        };
        let g = &self.cfg.grids;
        search_1d(&g.azimuths(), g.azimuth_step(), Domain::Periodic, g.refinement_levels, self.cfg.parallel, f)
            .ok_or_else(|| Error::NonConvergence("empty azimuth grid".into()))
    }

    /// Run the branch picked by the `T` threshold.
    pub fn estimate(&self, y: &CVector) -> Result<EstimationResult> {
        self.estimate_with(y, self.branch())
    }

    /// Run a specific branch.
    pub fn estimate_with(&self, y: &CVector, branch: Branch) -> Result<EstimationResult> {
        self.check(y)?;
        let (d, el, az, trace) = match branch {
            Branch::Jacobi => {
                let (el, _) = self.jacobi_elevation(y)?;
                let (az, _) = self.jacobi_azimuth(y, el)?;
                let (d, v) = self.distance_update(y, el, az, None)?;
                (d, el, az, vec![v])
            }
            Branch::Alternating => self.alternate(y)?,
        };
        self.finish(y, d, el, az, trace, branch)
    }

    fn alternate(&self, y: &CVector) -> Result<(f64, f64, f64, Vec<f64>)> {
        let ((mut el, mut az), _) = self.coarse_angles(y)?;
        let mut trace = Vec::new();
        let mut d = 0.0;
        let mut val = f64::INFINITY;
        for it in 0..self.cfg.max_iterations.max(1) {
            let inc = (it > 0).then_some((d, val));
            let (d1, v1) = self.distance_update(y, el, az, inc)?;
            trace.push(v1);
            let ((e2, a2), v2) = self.angle_update(y, d1, Some(((el, az), v1)))?;
            trace.push(v2);
            let prev = val;
            d = d1;
            el = e2;
            az = a2;
            val = v2;
            if prev.is_finite() && (prev - val) <= self.cfg.tol * prev {
                break;
            }
        }
        Ok((d, el, az, trace))
    }

    fn finish(
        &self,
        y: &CVector,
        d: f64,
        el: f64,
        az: f64,
        trace: Vec<f64>,
        branch: Branch,
    ) -> Result<EstimationResult> {
        let position = self.geom.position_at(d, el, az);
        let c = self.c_vector(&position);
        let (gain, _) = single_column_fit(c.as_slice(), y.as_slice())?;
        Ok(EstimationResult {
            position,
            gain,
            spherical: SphericalCoords { distance: d, elevation: el, azimuth: az },
            calibrated_zeta: None,
            objective_trace: trace,
            branch,
        })
    }
}

fn keep_incumbent<P: Copy>(found: (P, f64), incumbent: Option<(P, f64)>) -> (P, f64) {
    match incumbent {
        Some(inc) if !(found.1 < inc.1) => inc,
        _ => found,
    }
}

/// AMML under the unit-amplitude model.
pub fn amml(
    y: &CVector,
    schedule: &PhaseSchedule,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    cfg: &AmmlConfig,
) -> Result<EstimationResult> {
    AmmlEstimator::new(geom, p_bs, schedule, &RisAmplitudeParams::IDEAL, true, symbol_energy, *cfg)?.estimate(y)
}

/// Exhaustive 3-D search of the near-field objective: full
/// `(d, ϑ, φ)` grid followed by `refinement_levels` joint zoom levels.
pub fn exhaustive_mml(est: &AmmlEstimator, y: &CVector) -> Result<(SphericalCoords, f64)> {
    est.check(y)?;
    let g = &est.cfg.grids;
    let (ds, els, azs) = (g.distances(), g.elevations(), g.azimuths());
    let n = ds.len() * els.len() * azs.len();
    let idx: Vec<usize> = (0..n).collect();
    let at = |i: usize| (ds[i / (els.len() * azs.len())], els[(i / azs.len()) % els.len()], azs[i % azs.len()]);
    let (i, mut val) = grid_argmin(&idx, est.cfg.parallel, |&i| {
        let (d, e, a) = at(i);
        est.objective_at(y, d, e, a)
    })
    .ok_or_else(|| Error::NonConvergence("empty grid".into()))?;
    let mut best = at(i);
    let mut h = (g.distance_step(), g.elevation_step(), g.azimuth_step());
    for _ in 0..g.refinement_levels {
        h = (h.0 / ZOOM_FACTOR, h.1 / ZOOM_FACTOR, h.2 / ZOOM_FACTOR);
        // re-centre until the zoom stops improving
        for _ in 0..MAX_RECENTRES {
            let dz = zoom_points(best.0, h.0, Domain::Interval(g.d_range.0, g.d_range.1));
            let ez = zoom_points(best.1, h.1, Domain::Interval(0.0, FRAC_PI_2));
            let az = zoom_points(best.2, h.2, Domain::Periodic);
            let pts: Vec<(f64, f64, f64)> = dz
                .iter()
                .flat_map(|&d| ez.iter().flat_map(|&e| az.iter().map(move |&a| (d, e, a))).collect::<Vec<_>>())
                .collect();
            match grid_argmin(&pts, est.cfg.parallel, |&(d, e, a)| est.objective_at(y, d, e, a)) {
                Some((b, v)) if v < val => {
                    best = b;
                    val = v;
                }
                _ => break,
            }
        }
    }
    Ok((SphericalCoords { distance: best.0, elevation: best.1, azimuth: best.2 }, val))
}
