//! RIS geometry, steering vectors and spherical coordinates.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{CVector, Error, Result, C64};

pub type Vec3 = nalgebra::Vector3<f64>;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TWO_PI: f64 = 2.0 * PI;

/// Wavelength in meters for a carrier frequency in Hz.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Map an azimuth onto `[0, 2π)`.
pub fn wrap_azimuth(phi: f64) -> f64 {
    let w = phi.rem_euclid(TWO_PI);
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Range, elevation from +z and azimuth from +x, relative to the RIS center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoords {
    pub distance: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

impl SphericalCoords {
    pub fn new(distance: f64, elevation: f64, azimuth: f64) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::InvalidParameter(format!("distance {distance} must be positive")));
        }
        if !(0.0..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::InvalidParameter(format!("elevation {elevation} outside [0, pi/2]")));
        }
        if !azimuth.is_finite() {
            return Err(Error::InvalidParameter("azimuth must be finite".into()));
        }
        Ok(Self { distance, elevation, azimuth: wrap_azimuth(azimuth) })
    }

    /// Unit direction `[sinϑ cosφ, sinϑ sinφ, cosϑ]`.
    pub fn direction(elevation: f64, azimuth: f64) -> Vec3 {
        let (st, ct) = elevation.sin_cos();
        let (sp, cp) = azimuth.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

/// `-(2π/λ)·[sinϑ cosφ, sinϑ sinφ, cosϑ]`.
pub fn wavevector(wavelength: f64, elevation: f64, azimuth: f64) -> Vec3 {
    -(TWO_PI / wavelength) * SphericalCoords::direction(elevation, azimuth)
}

/// Planar RIS lying in the plane `z = center.z`.
#[derive(Clone, Debug)]
pub struct RisGeometry {
    center: Vec3,
    elements: Vec<Vec3>,
    wavelength: f64,
    patch: f64,
    radii: Vec<f64>,
    angles: Vec<f64>,
}

impl RisGeometry {
    /// Point-element RIS from explicit element positions.
    pub fn from_elements(center: Vec3, elements: Vec<Vec3>, wavelength: f64) -> Result<Self> {
        Self::build(center, elements, wavelength, 0.0)
    }

    /// `rows × cols` uniform planar array centred on `center`, spacing given in
    /// wavelengths. Elements are square patches as wide as the spacing and are
    /// indexed row-major (`m = row·cols + col`).
    pub fn upa(rows: usize, cols: usize, spacing_wavelengths: f64, wavelength: f64, center: Vec3) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("UPA needs at least one row and column".into()));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(Error::InvalidParameter("element spacing must be positive".into()));
        }
        let dx = spacing_wavelengths * wavelength;
        let x0 = (rows as f64 - 1.0) / 2.0;
        let y0 = (cols as f64 - 1.0) / 2.0;
        let mut elements = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                elements.push(center + Vec3::new((r as f64 - x0) * dx, (c as f64 - y0) * dx, 0.0));
            }
        }
        Self::build(center, elements, wavelength, dx)
    }

    fn build(center: Vec3, elements: Vec<Vec3>, wavelength: f64, patch: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter("RIS needs at least one element".into()));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        let scale = elements.iter().map(|p| (p - center).norm()).fold(wavelength, f64::max);
        if elements.iter().any(|p| (p.z - center.z).abs() > 1e-12 * scale) {
            return Err(Error::InvalidParameter("elements must lie in the x-y plane through the center".into()));
        }
        let radii = elements.iter().map(|p| (p - center).xy().norm()).collect();
        let angles = elements
            .iter()
            .map(|p| {
                let v = p - center;
                wrap_azimuth(v.y.atan2(v.x))
            })
            .collect();
        Ok(Self { center, elements, wavelength, patch, radii, angles })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }
    pub fn elements(&self) -> &[Vec3] {
        &self.elements
    }
    pub fn len(&self) -> usize {
        self.elements.len()
    }
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn wavenumber(&self) -> f64 {
        TWO_PI / self.wavelength
    }
    /// Side of the square patch each element occupies (0 for point elements).
    pub fn patch_size(&self) -> f64 {
        self.patch
    }
    /// `q_m`, in-plane distance of each element from the center.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    /// `ψ_m`, angle of each element from the x axis, in `[0, 2π)`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Largest element radius plus half a patch diagonal.
    pub fn q_max(&self) -> f64 {
        self.radii.iter().cloned().fold(0.0, f64::max) + self.patch * std::f64::consts::SQRT_2 / 2.0
    }

    /// Aperture: largest distance between element centers plus one patch diagonal.
    pub fn aperture(&self) -> Result<f64> {
        let m = self.elements.len();
        if m < 2 {
            return Err(Error::UndefinedAperture(m));
        }
        let mut best = 0.0f64;
        for i in 0..m {
            for j in i + 1..m {
                best = best.max((self.elements[i] - self.elements[j]).norm_squared());
            }
        }
        Ok(best.sqrt() + self.patch * std::f64::consts::SQRT_2)
    }

    /// Radiative near-field interval `(0.62·sqrt(D³/λ), 2D²/λ)`.
    pub fn fresnel_bounds(&self) -> Result<(f64, f64)> {
        let d = self.aperture()?;
        Ok((0.62 * (d.powi(3) / self.wavelength).sqrt(), 2.0 * d * d / self.wavelength))
    }

    /// Smallest Jacobi-Anger order with `N > k·q_max·sinϑ`.
    pub fn jacobi_order_bound(&self, elevation: f64) -> f64 {
        self.wavenumber() * self.q_max() * elevation.sin()
    }

    fn check_position(&self, p: &Vec3) -> Result<()> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::InvalidPosition("non-finite coordinate".into()));
        }
        let tol = 1e-12 * self.wavelength;
        if (p - self.center).norm() <= tol {
            return Err(Error::InvalidPosition("coincides with the RIS center".into()));
        }
        if self.elements.iter().any(|e| (p - e).norm() <= tol) {
            return Err(Error::InvalidPosition("coincides with a RIS element".into()));
        }
        Ok(())
    }

    /// Near-field steering `exp(-jk(‖p − p_m‖ − ‖p − p_RIS‖))`.
    pub fn near_field_steering(&self, p: &Vec3) -> Result<CVector> {
        self.check_position(p)?;
        Ok(self.near_field_steering_unchecked(p))
    }

    pub(crate) fn near_field_steering_unchecked(&self, p: &Vec3) -> CVector {
        let k = self.wavenumber();
        let v = p - self.center;
        let d = v.norm();
        CVector::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|e| {
                let u = e - self.center;
                let dm = (p - e).norm();
                // ‖p−p_m‖ − d without cancellation
                let diff = (u.norm_squared() - 2.0 * v.dot(&u)) / (dm + d);
                C64::from_polar(1.0, -k * diff)
            }),
        )
    }

    /// Far-field steering `exp(-j(p_m − p_RIS)ᵀ k(ϑ, φ))`.
    pub fn far_field_steering(&self, elevation: f64, azimuth: f64) -> Result<CVector> {
        if !(0.0..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::InvalidParameter(format!("elevation {elevation} outside [0, pi/2]")));
        }
        Ok(self.far_field_steering_unchecked(elevation, azimuth))
    }

    pub(crate) fn far_field_steering_unchecked(&self, elevation: f64, azimuth: f64) -> CVector {
        let kv = wavevector(self.wavelength, elevation, azimuth);
        CVector::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|e| C64::from_polar(1.0, -(e - self.center).dot(&kv))),
        )
    }

    /// Far-field steering written with element polar coordinates,
    /// `exp(jk·q_m·sinϑ·cos(φ − ψ_m))`.
    pub fn far_field_steering_polar(&self, elevation: f64, azimuth: f64) -> CVector {
        let ks = self.wavenumber() * elevation.sin();
        CVector::from_iterator(
            self.elements.len(),
            self.radii.iter().zip(&self.angles).map(|(q, psi)| C64::from_polar(1.0, ks * q * (azimuth - psi).cos())),
        )
    }

    pub fn spherical_to_position(&self, s: &SphericalCoords) -> Vec3 {
        self.center + s.distance * SphericalCoords::direction(s.elevation, s.azimuth)
    }

    pub(crate) fn position_at(&self, distance: f64, elevation: f64, azimuth: f64) -> Vec3 {
        self.center + distance * SphericalCoords::direction(elevation, azimuth)
    }

    pub fn position_to_spherical(&self, p: &Vec3) -> Result<SphericalCoords> {
        let v = p - self.center;
        let d = v.norm();
        if !(d > 0.0) {
            return Err(Error::InvalidPosition("position coincides with the RIS center".into()));
        }
        if v.z < 0.0 {
            return Err(Error::InvalidPosition("position below the RIS plane".into()));
        }
        let elevation = v.xy().norm().atan2(v.z);
        let azimuth = wrap_azimuth(v.y.atan2(v.x));
        Ok(SphericalCoords { distance: d, elevation, azimuth })
    }
}
