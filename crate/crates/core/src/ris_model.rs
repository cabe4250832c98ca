//! Phase-dependent element amplitude model, phase schedules and profile matrices.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Amplitude model parameters `(β_min, κ, φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RisAmplitudeParams {
    pub beta_min: f64,
    pub kappa: f64,
    pub phi: f64,
}

impl RisAmplitudeParams {
    /// Unit amplitude for every phase.
    pub const IDEAL: Self = Self { beta_min: 1.0, kappa: 0.0, phi: 0.0 };

    pub fn new(beta_min: f64, kappa: f64, phi: f64) -> Result<Self> {
        let p = Self { beta_min, kappa, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta_min) {
            return Err(Error::InvalidParameter(format!("beta_min {} outside [0, 1]", self.beta_min)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa {} must be >= 0", self.kappa)));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi {} must be >= 0", self.phi)));
        }
        Ok(())
    }

    /// True when the model reduces to unit amplitudes.
    pub fn is_ideal(&self) -> bool {
        self.beta_min == 1.0 || self.kappa == 0.0
    }
}

/// Wrap a phase onto `[−π, π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// `(sin(θ − φ) + 1)/2`, clamped to `[0, 1]`.
pub fn power_base(theta: f64, phi: f64) -> f64 {
    ((wrap_phase(theta) - phi).sin() * 0.5 + 0.5).clamp(0.0, 1.0)
}

/// `x^κ` with `0^0 = 1`.
pub fn power(x: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        1.0
    } else {
        x.powf(kappa)
    }
}

/// Element amplitude `(1 − β_min)·((sin(θ − φ) + 1)/2)^κ + β_min`.
pub fn beta(theta: f64, zeta: &RisAmplitudeParams) -> f64 {
    (1.0 - zeta.beta_min) * power(power_base(theta, zeta.phi), zeta.kappa) + zeta.beta_min
}

/// Complex reflection coefficient of one element.
pub fn element_response(theta: f64, zeta: &RisAmplitudeParams, ideal: bool) -> C64 {
    let th = wrap_phase(theta);
    let amp = if ideal { 1.0 } else { beta(th, zeta) };
    C64::from_polar(amp, th)
}

/// RIS phases `Θ`, one row per element and one column per transmission.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSchedule {
    phases: DMatrix<f64>,
}

impl PhaseSchedule {
    /// Wraps every entry onto `[−π, π)`.
    pub fn from_matrix(phases: DMatrix<f64>) -> Result<Self> {
        if phases.nrows() == 0 || phases.ncols() == 0 {
            return Err(Error::Dimension("phase schedule must be non-empty".into()));
        }
        if phases.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("phase schedule has non-finite entries".into()));
        }
        Ok(Self { phases: phases.map(wrap_phase) })
    }

    /// I.i.d. uniform phases on `[−π, π)`. Transmission-major draw order, so a
    /// shorter schedule from the same seed is a prefix of a longer one.
    pub fn random(elements: usize, transmissions: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(elements, transmissions, &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(elements: usize, transmissions: usize, rng: &mut R) -> Result<Self> {
        if elements == 0 || transmissions == 0 {
            return Err(Error::Dimension("phase schedule needs M, T >= 1".into()));
        }
        let mut phases = DMatrix::zeros(elements, transmissions);
        for t in 0..transmissions {
            for m in 0..elements {
                phases[(m, t)] = wrap_phase(rng.random_range(-PI..PI));
            }
        }
        Ok(Self { phases })
    }

    pub fn phases(&self) -> &DMatrix<f64> {
        &self.phases
    }
    pub fn elements(&self) -> usize {
        self.phases.nrows()
    }
    pub fn transmissions(&self) -> usize {
        self.phases.ncols()
    }

    /// Repeat the schedule `k` times along the transmission axis.
    pub fn tile(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("tiling factor must be >= 1".into()));
        }
        let t = self.transmissions();
        let phases = DMatrix::from_fn(self.elements(), t * k, |m, c| self.phases[(m, c % t)]);
        Ok(Self { phases })
    }

    /// CSV with one row per element and one column per transmission.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for m in 0..self.elements() {
            let row: Vec<String> = (0..self.transmissions()).map(|t| format!("{:e}", self.phases[(m, t)])).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("phase schedule: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let m = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if m == 0 || rows.iter().any(|r| r.len() != t) {
            return Err(Error::Dimension("phase schedule CSV must be a non-empty rectangle".into()));
        }
        Self::from_matrix(DMatrix::from_fn(m, t, |i, j| rows[i][j]))
    }
}

/// Which amplitude model produced a profile matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    TrueModel,
    UnitAmplitude,
}

/// Complex element weights `W`, one row per element and one column per transmission.
#[derive(Clone, Debug)]
pub struct ProfileMatrix {
    pub weights: CMatrix,
    pub tag: ModelTag,
}

impl ProfileMatrix {
    pub fn elements(&self) -> usize {
        self.weights.nrows()
    }
    pub fn transmissions(&self) -> usize {
        self.weights.ncols()
    }
}

pub fn profile_matrix(schedule: &PhaseSchedule, zeta: &RisAmplitudeParams, ideal: bool) -> ProfileMatrix {
    let weights = schedule.phases.map(|th| element_response(th, zeta, ideal));
    let tag = if ideal { ModelTag::UnitAmplitude } else { ModelTag::TrueModel };
    ProfileMatrix { weights, tag }
}

/// `Γ₂ = ((sin(Θ − φ) + 1)/2)^κ` and `Γ₁ = 1 − Γ₂`.
#[derive(Clone, Debug)]
pub struct GammaDecomposition {
    pub gamma1: DMatrix<f64>,
    pub gamma2: DMatrix<f64>,
}

impl GammaDecomposition {
    pub fn new(schedule: &PhaseSchedule, kappa: f64, phi: f64) -> Self {
        let gamma2 = schedule.phases.map(|th| power(power_base(th, phi), kappa));
        let gamma1 = gamma2.map(|g| 1.0 - g);
        Self { gamma1, gamma2 }
    }

    /// `(β_min·Γ₁ + Γ₂) ⊙ e^{jΘ}`.
    pub fn weights(&self, schedule: &PhaseSchedule, beta_min: f64) -> CMatrix {
        CMatrix::from_fn(schedule.elements(), schedule.transmissions(), |m, t| {
            let amp = beta_min * self.gamma1[(m, t)] + self.gamma2[(m, t)];
            C64::from_polar(amp, schedule.phases[(m, t)])
        })
    }

    /// `Γ̃ᵢ = Γᵢ ⊙ e^{jΘ} ⊙ a(p_BS)1ᵀ` for `i = 1, 2`.
    pub fn steering_weighted(&self, schedule: &PhaseSchedule, a_bs: &CVector) -> (CMatrix, CMatrix) {
        let f = |g: &DMatrix<f64>| {
            CMatrix::from_fn(schedule.elements(), schedule.transmissions(), |m, t| {
                a_bs[m] * C64::from_polar(g[(m, t)], schedule.phases[(m, t)])
            })
        };
        (f(&self.gamma1), f(&self.gamma2))
    }
}
