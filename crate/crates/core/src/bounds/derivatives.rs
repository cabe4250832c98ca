//! Analytic derivatives of the noiseless mean.

use crate::geometry::{RisGeometry, Vec3};
use crate::ris_model::{power, power_base, PhaseSchedule, RisAmplitudeParams};
use crate::signal::{b_vector, ChannelGain};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Parameter order `[Re α, Im α, x, y, z]`.
pub const NPARAM: usize = 5;

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// First (`T × 5`) and second (`T`-vectors per pair) derivatives of the mean
/// with respect to `[Re α, Im α, x, y, z]`.
#[derive(Clone, Debug)]
pub struct MeanDerivatives {
    pub first: CMatrix,
    second: Vec<CVector>,
}

impl MeanDerivatives {
    /// `∂²μ/∂η_i∂η_j`.
    pub fn second(&self, i: usize, j: usize) -> &CVector {
        &self.second[i * NPARAM + j]
    }
}

/// Derivatives of `μ_t = α·√E_s·Σ_m b_m(p) W_{m,t}` for a given weight matrix
/// `W` (`M × T`). Works for either the assumed or the true amplitude model.
pub fn mean_derivatives(
    gain: ChannelGain,
    position: &Vec3,
    weights: &CMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<MeanDerivatives> {
    if weights.nrows() != geom.len() {
        return Err(Error::Dimension("weight rows must equal the element count".into()));
    }
    let b = b_vector(geom, p_bs, position)?;
    let k = geom.wavenumber();
    let jk = C64::new(0.0, k);
    let v = position - geom.center();
    let d = v.norm();
    let u = v / d;
    let h = (nalgebra::Matrix3::identity() - u * u.transpose()) / d;

    // per-element coefficients: 1, −jk·g_ν, and −k²g_a g_b − jk·ΔH_ab
    let m = geom.len();
    let mut coef = CMatrix::zeros(m, 10);
    for (i, e) in geom.elements().iter().enumerate() {
        let w = position - e;
        let dm = w.norm();
        let um = w / dm;
        let g = um - u;
        let hm = (nalgebra::Matrix3::identity() - um * um.transpose()) / dm;
        let bi = b[i];
        coef[(i, 0)] = bi;
        for nu in 0..3 {
            coef[(i, 1 + nu)] = -bi * jk * g[nu];
        }
        for (c, &(p, q)) in PAIRS.iter().enumerate() {
            let dh = hm[(p, q)] - h[(p, q)];
            coef[(i, 4 + c)] = bi * (C64::new(-k * k * g[p] * g[q], 0.0) - jk * dh);
        }
    }
    let s = weights.tr_mul(&coef) * C64::new(symbol_energy.sqrt(), 0.0);
    let t = weights.ncols();
    let j = C64::new(0.0, 1.0);

    let mut first = CMatrix::zeros(t, NPARAM);
    first.set_column(0, &s.column(0));
    first.set_column(1, &(s.column(0) * j));
    for nu in 0..3 {
        first.set_column(2 + nu, &(s.column(1 + nu) * gain));
    }

    let zero = CVector::zeros(t);
    let mut second = vec![zero; NPARAM * NPARAM];
    for nu in 0..3 {
        let col = s.column(1 + nu).into_owned();
        let ci = &col * j;
        second[2 + nu] = col.clone();
        second[(2 + nu) * NPARAM] = col;
        second[NPARAM + 2 + nu] = ci.clone();
        second[(2 + nu) * NPARAM + 1] = ci;
    }
    for (c, &(p, q)) in PAIRS.iter().enumerate() {
        let col = s.column(4 + c) * gain;
        second[(2 + p) * NPARAM + 2 + q] = col.clone();
        second[(2 + q) * NPARAM + 2 + p] = col;
    }
    Ok(MeanDerivatives { first, second })
}

/// Derivatives of the true-model mean with respect to `(β_min, κ, φ)`, `T × 3`.
pub fn amplitude_derivatives(
    gain: ChannelGain,
    position: &Vec3,
    schedule: &PhaseSchedule,
    zeta: &RisAmplitudeParams,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<CMatrix> {
    if schedule.elements() != geom.len() {
        return Err(Error::Dimension("schedule rows must equal the element count".into()));
    }
    let b = b_vector(geom, p_bs, position)?;
    let phases = schedule.phases();
    let scale = gain * symbol_energy.sqrt();
    let (bm, kappa, phi) = (zeta.beta_min, zeta.kappa, zeta.phi);
    let mut out = CMatrix::zeros(schedule.transmissions(), 3);
    for t in 0..schedule.transmissions() {
        let mut acc = [C64::new(0.0, 0.0); 3];
        for m in 0..geom.len() {
            let th = phases[(m, t)];
            let x = power_base(th, phi);
            let xk = power(x, kappa);
            let z = b[m] * C64::from_polar(1.0, th);
            let d_beta = 1.0 - xk;
            let (d_kappa, d_phi) = if x > 0.0 {
                ((1.0 - bm) * xk * x.ln(), -(1.0 - bm) * kappa * power(x, kappa - 1.0) * (th - phi).cos() / 2.0)
            } else {
                (0.0, 0.0)
            };
            acc[0] += z * d_beta;
            acc[1] += z * d_kappa;
            acc[2] += z * d_phi;
        }
        for (c, a) in acc.iter().enumerate() {
            out[(t, c)] = a * scale;
        }
    }
    Ok(out)
}
