#![allow(dead_code)]

use risloc::estimators::{AmmlConfig, SearchGrids};
use risloc::geometry::{wavelength, RisGeometry, Vec3};

/// Square array at 28 GHz with the UE and BS placed at the same fractions of
/// the Fresnel interval as the 50 × 50 reference layout.
pub struct Scene {
    pub geom: RisGeometry,
    pub ue: Vec3,
    pub bs: Vec3,
}

pub fn scene(side: usize) -> Scene {
    let geom = RisGeometry::upa(side, side, 0.5, wavelength(28e9), Vec3::zeros()).unwrap();
    let (_, hi) = geom.fresnel_bounds().unwrap();
    let s = 3f64.sqrt();
    let ue = Vec3::new(1.0, 1.0, 1.0) * (0.187 * hi / s);
    let bs = Vec3::new(-1.0, 1.0, 1.0) * (0.373 * hi / s);
    Scene { geom, ue, bs }
}

pub fn small_grids(geom: &RisGeometry) -> SearchGrids {
    SearchGrids::new(60, 60, 16, geom.fresnel_bounds().unwrap(), 2).unwrap()
}

pub fn config(geom: &RisGeometry, order: usize) -> AmmlConfig {
    AmmlConfig::new(small_grids(geom), order)
}

/// Spatial size of one refined cell around distance `d`.
pub fn refined_cell(g: &SearchGrids, d: f64) -> f64 {
    let hd = g.refined(g.distance_step());
    let ht = g.refined(g.elevation_step());
    let hp = g.refined(g.azimuth_step());
    (hd * hd + (d * ht).powi(2) + (d * hp).powi(2)).sqrt()
}
