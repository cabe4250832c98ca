//! Forward model: noiseless means, noisy observations and SNR bookkeeping.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{RisGeometry, Vec3};
use crate::ris_model::{ProfileMatrix, RisAmplitudeParams};
use crate::{CMatrix, CVector, Error, Result, C64};

pub type ChannelGain = C64;

/// `[Re α, Im α, p]`, optionally extended with the amplitude parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub gain: ChannelGain,
    pub position: Vec3,
    pub ris: Option<RisAmplitudeParams>,
}

impl ParamVector {
    pub fn new(gain: ChannelGain, position: Vec3) -> Self {
        Self { gain, position, ris: None }
    }

    pub fn with_ris(mut self, zeta: RisAmplitudeParams) -> Self {
        self.ris = Some(zeta);
        self
    }

    /// 5-vector, or 8-vector when the amplitude parameters are present.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = vec![self.gain.re, self.gain.im, self.position.x, self.position.y, self.position.z];
        if let Some(z) = self.ris {
            v.extend([z.beta_min, z.kappa, z.phi]);
        }
        DVector::from_vec(v)
    }
}

/// Received samples with the noise level and symbol energy they were drawn at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub samples: Vec<C64>,
    pub noise_var: f64,
    pub symbol_energy: f64,
}

impl Observation {
    pub fn vector(&self) -> CVector {
        CVector::from_column_slice(&self.samples)
    }
}

/// `a(p) ⊙ a(p_BS)`.
pub fn b_vector(geom: &RisGeometry, p_bs: &Vec3, p: &Vec3) -> Result<CVector> {
    let a = geom.near_field_steering(p)?;
    let a_bs = geom.near_field_steering(p_bs)?;
    Ok(a.component_mul(&a_bs))
}

/// `μ_t = α·√E_s·Σ_m b_m W_{m,t}`.
pub fn noiseless_mean(
    gain: ChannelGain,
    position: &Vec3,
    weights: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<CVector> {
    check_dims(weights, geom)?;
    let b = b_vector(geom, p_bs, position)?;
    Ok(weights.weights.tr_mul(&b) * (gain * symbol_energy.sqrt()))
}

fn check_dims(weights: &ProfileMatrix, geom: &RisGeometry) -> Result<()> {
    if weights.elements() != geom.len() {
        return Err(Error::Dimension(format!(
            "profile has {} elements, geometry has {}",
            weights.elements(),
            geom.len()
        )));
    }
    Ok(())
}

/// Add circular complex Gaussian noise of per-sample variance `N₀`.
pub fn observe<R: Rng + ?Sized>(
    mean: &CVector,
    noise_var: f64,
    symbol_energy: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be >= 0")));
    }
    let s = (noise_var / 2.0).sqrt();
    let samples = mean
        .iter()
        .map(|m| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m + C64::new(re * s, im * s)
        })
        .collect();
    Ok(Observation { samples, noise_var, symbol_energy })
}

/// [`observe`] with a fresh ChaCha8 stream.
pub fn observe_seeded(mean: &CVector, noise_var: f64, symbol_energy: f64, seed: u64) -> Result<Observation> {
    observe(mean, noise_var, symbol_energy, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `Σ_t |bᵀ(p) w_t|²`.
fn beam_energy(position: &Vec3, weights: &ProfileMatrix, geom: &RisGeometry, p_bs: &Vec3) -> Result<f64> {
    check_dims(weights, geom)?;
    let b = b_vector(geom, p_bs, position)?;
    Ok(weights.weights.tr_mul(&b).norm_squared())
}

/// Linear SNR `E_s|α|²/(T·N₀)·Σ_t |bᵀ w_t|²`.
pub fn snr_linear(
    gain: ChannelGain,
    position: &Vec3,
    weights: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    noise_var: f64,
) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let e = beam_energy(position, weights, geom, p_bs)?;
    Ok(symbol_energy * gain.norm_sqr() * e / (weights.transmissions() as f64 * noise_var))
}

pub fn snr_db(
    gain: ChannelGain,
    position: &Vec3,
    weights: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    noise_var: f64,
) -> Result<f64> {
    Ok(10.0 * snr_linear(gain, position, weights, geom, p_bs, symbol_energy, noise_var)?.log10())
}

/// `N₀` that makes [`snr_db`] equal `target_db`.
pub fn solve_noise_for_snr(
    target_db: f64,
    gain: ChannelGain,
    position: &Vec3,
    weights: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<f64> {
    if !target_db.is_finite() {
        return Err(Error::InvalidParameter("target SNR must be finite".into()));
    }
    let e = beam_energy(position, weights, geom, p_bs)?;
    let signal = symbol_energy * gain.norm_sqr() * e / weights.transmissions() as f64;
    if !(signal > 0.0) {
        return Err(Error::DegenerateSignal("zero received signal energy".into()));
    }
    Ok(signal / 10f64.powf(target_db / 10.0))
}

/// `Qᵀ` with row `t = (w_t ⊙ a(p_BS))ᵀ`, stored `T × M`.
pub fn qtilde_matrix(weights: &ProfileMatrix, geom: &RisGeometry, p_bs: &Vec3) -> Result<CMatrix> {
    check_dims(weights, geom)?;
    let a_bs = geom.near_field_steering(p_bs)?;
    let w = &weights.weights;
    Ok(CMatrix::from_fn(w.ncols(), w.nrows(), |t, m| w[(m, t)] * a_bs[m]))
}
