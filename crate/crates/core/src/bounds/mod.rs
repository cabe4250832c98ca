//! Misspecified and classical Cramér–Rao bounds.

mod derivatives;
mod pseudo_true;

pub use derivatives::{amplitude_derivatives, mean_derivatives, MeanDerivatives, NPARAM};
pub use pseudo_true::{c_vector, epsilon_norm, optimal_alpha, pseudo_true, PseudoTrueResult, SolverConfig};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::{RisGeometry, Vec3};
use crate::linalg::checked_inverse;
use crate::ris_model::{profile_matrix, PhaseSchedule, ProfileMatrix, RisAmplitudeParams};
use crate::signal::{noiseless_mean, ChannelGain, ParamVector};
use crate::{CMatrix, Error, Result};

/// Misspecified bound at the pseudo-true parameter.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub mcrb: DMatrix<f64>,
    pub bias_outer: DMatrix<f64>,
    pub lb: DMatrix<f64>,
    /// `sqrt(tr LB[pos])`, meters.
    pub pos_rmse_bound: f64,
    /// `sqrt(tr MCRB[pos])`, meters.
    pub mcrb_pos_rmse: f64,
    /// `‖p̄ − p₀‖`, meters.
    pub bias_norm: f64,
    pub condition: f64,
}

/// Fisher information and the position CRB derived from it.
#[derive(Clone, Debug)]
pub struct FimReport {
    pub j: DMatrix<f64>,
    pub crb: DMatrix<f64>,
    pub crb_pos_rmse: f64,
    pub condition: f64,
}

/// Which model the Fisher information is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Amplitude model ignored by the estimator (misspecified bound).
    #[serde(rename = "I")]
    I,
    /// Amplitude parameters unknown and estimated jointly.
    #[serde(rename = "II")]
    II,
    /// Amplitude parameters known.
    #[serde(rename = "III")]
    III,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::I => "I",
            Scenario::II => "II",
            Scenario::III => "III",
        })
    }
}

fn pos_rmse(m: &DMatrix<f64>) -> f64 {
    (m[(2, 2)] + m[(3, 3)] + m[(4, 4)]).max(0.0).sqrt()
}

fn re_inner(a: &CMatrix, b: &CMatrix) -> DMatrix<f64> {
    a.ad_mul(b).map(|z| z.re)
}

/// `A`, `B`, MCRB and LB at `η₀` for data generated by the true profile.
#[allow(clippy::too_many_arguments)]
pub fn mcrb_matrices(
    eta0: &ParamVector,
    eta_true: &ParamVector,
    true_w: &ProfileMatrix,
    ideal_w: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    noise_var: f64,
) -> Result<BoundReport> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let mu = noiseless_mean(eta_true.gain, &eta_true.position, true_w, geom, p_bs, symbol_energy)?;
    let mt = noiseless_mean(eta0.gain, &eta0.position, ideal_w, geom, p_bs, symbol_energy)?;
    let eps = mu - mt;
    let d = mean_derivatives(eta0.gain, &eta0.position, &ideal_w.weights, geom, p_bs, symbol_energy)?;
    let c = 2.0 / noise_var;

    let s = re_inner(&d.first, &d.first);
    let g: Vec<f64> = (0..NPARAM).map(|i| eps.dotc(&d.first.column(i)).re).collect();
    let mut a = DMatrix::zeros(NPARAM, NPARAM);
    let mut b = DMatrix::zeros(NPARAM, NPARAM);
    for i in 0..NPARAM {
        for j in 0..NPARAM {
            a[(i, j)] = c * (eps.dotc(d.second(i, j)).re - s[(i, j)]);
            b[(i, j)] = c * (c * g[i] * g[j] + s[(i, j)]);
        }
    }
    a = (&a + a.transpose()) * 0.5;
    b = (&b + b.transpose()) * 0.5;
    let (a_inv, condition) = checked_inverse(&a, "A matrix")?;
    let mut mcrb = &a_inv * &b * &a_inv;
    mcrb = (&mcrb + mcrb.transpose()) * 0.5;
    let diff = eta_true.to_vector().rows(0, NPARAM) - eta0.to_vector().rows(0, NPARAM);
    let bias_outer = &diff * diff.transpose();
    let lb = &mcrb + &bias_outer;
    Ok(BoundReport {
        pos_rmse_bound: pos_rmse(&lb),
        mcrb_pos_rmse: pos_rmse(&mcrb),
        bias_norm: (eta_true.position - eta0.position).norm(),
        a,
        b,
        mcrb,
        bias_outer,
        lb,
        condition,
    })
}

/// Fisher information `(2/N₀)·Re{DᴴD}` under the true amplitude model.
/// Scenario III uses `[Re α, Im α, p]`; Scenario II appends `(β_min, κ, φ)`.
#[allow(clippy::too_many_arguments)]
pub fn fim(
    gain: ChannelGain,
    position: &Vec3,
    schedule: &PhaseSchedule,
    zeta: &RisAmplitudeParams,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    noise_var: f64,
    scenario: Scenario,
) -> Result<FimReport> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let w = profile_matrix(schedule, zeta, false);
    let d = mean_derivatives(gain, position, &w.weights, geom, p_bs, symbol_energy)?;
    let jac = match scenario {
        Scenario::III => d.first,
        Scenario::II => {
            let extra = amplitude_derivatives(gain, position, schedule, zeta, geom, p_bs, symbol_energy)?;
            let mut full = CMatrix::zeros(d.first.nrows(), NPARAM + 3);
            full.columns_mut(0, NPARAM).copy_from(&d.first);
            full.columns_mut(NPARAM, 3).copy_from(&extra);
            full
        }
        Scenario::I => return Err(Error::InvalidParameter("Scenario I uses mcrb_matrices".into())),
    };
    let mut j = re_inner(&jac, &jac) * (2.0 / noise_var);
    j = (&j + j.transpose()) * 0.5;
    let (crb, condition) = checked_inverse(&j, "Fisher information")?;
    Ok(FimReport { crb_pos_rmse: pos_rmse(&crb), j, crb, condition })
}

/// Trace ratios between a `K`-fold tiled schedule and its base.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub k: usize,
    pub crb_ratio: f64,
    pub mcrb_ratio: f64,
    pub lb_ratio: f64,
    /// `‖η₀(tiled) − η₀(base)‖` over the five real parameters.
    pub bias_delta: f64,
    pub residual_ratio: f64,
}

/// Compare bounds of `base` and `base` tiled `k` times at the same `N₀`.
#[allow(clippy::too_many_arguments)]
pub fn lemma2_check(
    base: &PhaseSchedule,
    k: usize,
    gain: ChannelGain,
    position: &Vec3,
    zeta: &RisAmplitudeParams,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    noise_var: f64,
    solver: &SolverConfig,
) -> Result<Lemma2Report> {
    if k < 2 {
        return Err(Error::InvalidParameter("tiling factor must be >= 2".into()));
    }
    let tiled = base.tile(k)?;
    let eval = |s: &PhaseSchedule| -> Result<(f64, f64, f64, ParamVector, f64)> {
        let tw = profile_matrix(s, zeta, false);
        let iw = profile_matrix(s, zeta, true);
        let pt = pseudo_true(gain, position, &tw, &iw, geom, p_bs, symbol_energy, solver)?;
        let truth = ParamVector::new(gain, *position);
        let rep = mcrb_matrices(&pt.eta0, &truth, &tw, &iw, geom, p_bs, symbol_energy, noise_var)?;
        let f = fim(gain, position, s, zeta, geom, p_bs, symbol_energy, noise_var, Scenario::III)?;
        Ok((f.crb.trace(), rep.mcrb.trace(), rep.lb.trace(), pt.eta0, pt.residual))
    };
    let (c1, m1, l1, e1, r1) = eval(base)?;
    let (c2, m2, l2, e2, r2) = eval(&tiled)?;
    Ok(Lemma2Report {
        k,
        crb_ratio: c2 / c1,
        mcrb_ratio: m2 / m1,
        lb_ratio: l2 / l1,
        bias_delta: (e2.to_vector() - e1.to_vector()).norm(),
        residual_ratio: r2 / (r1 * (k as f64).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::solve_noise_for_snr;
    use crate::C64;

    struct Tiny {
        g: RisGeometry,
        bs: Vec3,
        ue: Vec3,
        s: PhaseSchedule,
    }

    fn tiny() -> Tiny {
        let g = RisGeometry::upa(4, 4, 0.5, 0.01, Vec3::zeros()).unwrap();
        Tiny {
            g,
            bs: Vec3::new(-0.05, 0.05, 0.07),
            ue: Vec3::new(0.04, 0.035, 0.05),
            s: PhaseSchedule::random(16, 10, 8).unwrap(),
        }
    }

    fn solver() -> SolverConfig {
        SolverConfig { restart_radius: 0.01, initial_step: 0.002, ..Default::default() }
    }

    #[test]
    fn no_mismatch_mcrb_equals_crb() {
        let t = tiny();
        let z = RisAmplitudeParams::new(1.0, 1.5, 0.0).unwrap();
        let tw = profile_matrix(&t.s, &z, false);
        let iw = profile_matrix(&t.s, &z, true);
        let gain = C64::new(1.0, 0.0);
        let n0 = solve_noise_for_snr(20.0, gain, &t.ue, &tw, &t.g, &t.bs, 1.0).unwrap();
        let pt = pseudo_true(gain, &t.ue, &tw, &iw, &t.g, &t.bs, 1.0, &solver()).unwrap();
        let truth = ParamVector::new(gain, t.ue);
        let rep = mcrb_matrices(&pt.eta0, &truth, &tw, &iw, &t.g, &t.bs, 1.0, n0).unwrap();
        let f = fim(gain, &t.ue, &t.s, &z, &t.g, &t.bs, 1.0, n0, Scenario::III).unwrap();
        let rel = (&rep.mcrb - &f.crb).norm() / f.crb.norm();
        assert!(rel < 1e-8, "{rel}");
        assert!(rep.bias_outer.amax() < 1e-16);
        assert!((&rep.a + &rep.b).norm() / rep.b.norm() < 1e-10);
    }

    #[test]
    fn bias_term_is_rank_one_and_noise_free() {
        let t = tiny();
        let z = RisAmplitudeParams::new(0.5, 1.5, 0.0).unwrap();
        let tw = profile_matrix(&t.s, &z, false);
        let iw = profile_matrix(&t.s, &z, true);
        let gain = C64::new(1.0, 0.0);
        let pt = pseudo_true(gain, &t.ue, &tw, &iw, &t.g, &t.bs, 1.0, &solver()).unwrap();
        let truth = ParamVector::new(gain, t.ue);
        let r1 = mcrb_matrices(&pt.eta0, &truth, &tw, &iw, &t.g, &t.bs, 1.0, 1e-2).unwrap();
        let r2 = mcrb_matrices(&pt.eta0, &truth, &tw, &iw, &t.g, &t.bs, 1.0, 1e-4).unwrap();
        assert_eq!(r1.bias_outer, r2.bias_outer);
        let sv = r1.bias_outer.clone().singular_values();
        assert!(sv[1] <= 1e-12 * sv[0].max(1e-300));
        let eig = r1.lb.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > -1e-10 * eig.max());
        assert!(r1.mcrb.clone().symmetric_eigen().eigenvalues.min() > -1e-10 * r1.mcrb.norm());
    }

    #[test]
    fn fim_scales_with_noise() {
        let t = tiny();
        let z = RisAmplitudeParams::new(0.6, 1.5, 0.3).unwrap();
        let gain = C64::new(0.5, 0.5);
        let f1 = fim(gain, &t.ue, &t.s, &z, &t.g, &t.bs, 1.0, 1e-2, Scenario::III).unwrap();
        let f2 = fim(gain, &t.ue, &t.s, &z, &t.g, &t.bs, 1.0, 1e-3, Scenario::III).unwrap();
        assert!((f1.crb.trace() / f2.crb.trace() - 10.0).abs() < 1e-9);
        let f8 = fim(gain, &t.ue, &t.s, &z, &t.g, &t.bs, 1.0, 1e-2, Scenario::II).unwrap();
        assert_eq!(f8.j.nrows(), 8);
        assert!(f8.crb_pos_rmse >= f1.crb_pos_rmse * (1.0 - 1e-9));
        assert!((&f8.j - f8.j.transpose()).amax() == 0.0);
    }
}
