//! Search grids and local zoom refinement.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_azimuth, RisGeometry};
use crate::par;
use crate::{Error, Result};

/// Points per side of a refinement zoom; the zoom spans one parent step on
/// each side of the incumbent.
pub const ZOOM_HALF_WIDTH: i32 = 5;
/// Step shrink factor per refinement level.
pub const ZOOM_FACTOR: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrids {
    /// Points on the elevation and azimuth grids.
    pub k_angle: usize,
    /// Points on the distance grid.
    pub k_dist: usize,
    /// Points on the `κ` and RIS `φ` grids.
    pub l_calib: usize,
    pub d_range: (f64, f64),
    pub refinement_levels: usize,
}

impl SearchGrids {
    pub fn new(
        k_angle: usize,
        k_dist: usize,
        l_calib: usize,
        d_range: (f64, f64),
        refinement_levels: usize,
    ) -> Result<Self> {
        let g = Self { k_angle, k_dist, l_calib, d_range, refinement_levels };
        g.validate()?;
        Ok(g)
    }

    /// Default sizes (180, 200, 64, two zoom levels) over the Fresnel interval.
    pub fn for_geometry(geom: &RisGeometry) -> Result<Self> {
        Self::new(180, 200, 64, geom.fresnel_bounds()?, 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_angle < 3 || self.k_dist < 3 || self.l_calib < 3 {
            return Err(Error::InvalidParameter("grid sizes must be at least 3".into()));
        }
        let (lo, hi) = self.d_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad distance range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Check the distance range against the Fresnel interval of `geom`.
    pub fn check_against(&self, geom: &RisGeometry) -> Result<()> {
        let (lo, hi) = geom.fresnel_bounds()?;
        let tol = 1e-9 * hi;
        if self.d_range.0 < lo - tol || self.d_range.1 > hi + tol {
            return Err(Error::InvalidParameter(format!(
                "distance range ({}, {}) leaves the Fresnel interval ({lo}, {hi})",
                self.d_range.0, self.d_range.1
            )));
        }
        Ok(())
    }

    pub fn elevation_step(&self) -> f64 {
        FRAC_PI_2 / (self.k_angle - 1) as f64
    }
    pub fn azimuth_step(&self) -> f64 {
        TAU / self.k_angle as f64
    }
    pub fn distance_step(&self) -> f64 {
        (self.d_range.1 - self.d_range.0) / (self.k_dist - 1) as f64
    }
    pub fn kappa_step(&self, kappa_max: f64) -> f64 {
        kappa_max / self.l_calib as f64
    }
    pub fn calib_phi_step(&self) -> f64 {
        TAU / self.l_calib as f64
    }

    /// `[0, π/2]`, endpoints included.
    pub fn elevations(&self) -> Vec<f64> {
        (0..self.k_angle).map(|i| i as f64 * self.elevation_step()).collect()
    }
    /// `[0, 2π)`.
    pub fn azimuths(&self) -> Vec<f64> {
        (0..self.k_angle).map(|i| i as f64 * self.azimuth_step()).collect()
    }
    pub fn distances(&self) -> Vec<f64> {
        (0..self.k_dist).map(|i| self.d_range.0 + i as f64 * self.distance_step()).collect()
    }
    /// `[0, κ_max)`.
    pub fn kappas(&self, kappa_max: f64) -> Vec<f64> {
        (0..self.l_calib).map(|i| i as f64 * self.kappa_step(kappa_max)).collect()
    }
    /// `[0, 2π)`.
    pub fn calib_phis(&self) -> Vec<f64> {
        (0..self.l_calib).map(|i| i as f64 * self.calib_phi_step()).collect()
    }

    /// Step after all refinement levels.
    pub fn refined(&self, step: f64) -> f64 {
        step / ZOOM_FACTOR.powi(self.refinement_levels as i32)
    }
}

/// How a zoom treats points that leave the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Interval(f64, f64),
    Periodic,
}

/// Zoom points around `center` with spacing `step`, in offset order.
pub fn zoom_points(center: f64, step: f64, domain: Domain) -> Vec<f64> {
    (-ZOOM_HALF_WIDTH..=ZOOM_HALF_WIDTH)
        .filter_map(|i| {
            let v = center + i as f64 * step;
            match domain {
                Domain::Interval(lo, hi) => (v >= lo && v <= hi).then_some(v),
                Domain::Periodic => Some(wrap_azimuth(v)),
            }
        })
        .collect()
}

/// Evaluate `f` on every point and return the first minimiser with its value.
pub fn grid_argmin<P: Copy + Sync, F>(points: &[P], parallel: bool, f: F) -> Option<(P, f64)>
where
    F: Fn(&P) -> f64 + Sync + Send,
{
    let vals = par::map_slice(points, parallel, |p| f(p));
    par::argmin_first(&vals).map(|i| (points[i], vals[i]))
}

/// 1-D search: full grid, then `levels` zooms, each shrinking the step by 5.
pub fn search_1d<F>(grid: &[f64], step: f64, domain: Domain, levels: usize, parallel: bool, f: F) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let (mut best, mut val) = grid_argmin(grid, parallel, |&x| f(x))?;
    let mut h = step;
    for _ in 0..levels {
        h /= ZOOM_FACTOR;
        let pts = zoom_points(best, h, domain);
        if let Some((b, v)) = grid_argmin(&pts, parallel, |&x| f(x)) {
            if v < val {
                best = b;
                val = v;
            }
        }
    }
    Some((best, val))
}

/// 2-D search over a tensor grid (first coordinate major), then zooms.
#[allow(clippy::too_many_arguments)]
pub fn search_2d<F>(
    g0: &[f64],
    g1: &[f64],
    steps: (f64, f64),
    domains: (Domain, Domain),
    levels: usize,
    parallel: bool,
    f: F,
) -> Option<((f64, f64), f64)>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let pts: Vec<(f64, f64)> = g0.iter().flat_map(|&a| g1.iter().map(move |&b| (a, b))).collect();
    let (mut best, mut val) = grid_argmin(&pts, parallel, |&(a, b)| f(a, b))?;
    let (mut h0, mut h1) = steps;
    for _ in 0..levels {
        h0 /= ZOOM_FACTOR;
        h1 /= ZOOM_FACTOR;
        if let Some((b, v)) = zoom_2d(best, (h0, h1), domains, parallel, &f) {
            if v < val {
                best = b;
                val = v;
            }
        }
    }
    Some((best, val))
}

/// One 11 × 11 zoom around `center`.
pub fn zoom_2d<F>(
    center: (f64, f64),
    steps: (f64, f64),
    domains: (Domain, Domain),
    parallel: bool,
    f: &F,
) -> Option<((f64, f64), f64)>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let a = zoom_points(center.0, steps.0, domains.0);
    let b = zoom_points(center.1, steps.1, domains.1);
    let pts: Vec<(f64, f64)> = a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect();
    grid_argmin(&pts, parallel, |&(x, y)| f(x, y))
}

/// Smallest distance between two azimuths on the circle.
pub fn azimuth_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
