//! Pseudo-true parameter of the unit-amplitude model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{RisGeometry, Vec3};
use crate::linalg::single_column_fit;
use crate::par;
use crate::ris_model::ProfileMatrix;
use crate::signal::{b_vector, noiseless_mean, ChannelGain, ParamVector};
use crate::{CVector, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Random restarts around the true position, in addition to the true position itself.
    pub n_restarts: usize,
    /// Distance of the restart points from the true position, meters.
    pub restart_radius: f64,
    /// Initial simplex edge, meters.
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop when the simplex diameter falls below this, meters.
    pub x_tol: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_restarts: 8,
            restart_radius: 0.5,
            initial_step: 0.05,
            max_evals: 4000,
            x_tol: 1e-10,
            seed: 0x5eed,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoTrueResult {
    pub eta0: ParamVector,
    /// `‖ε(η₀)‖`.
    pub residual: f64,
    pub evaluations: usize,
    pub restarts: usize,
    /// Index of the winning start (0 is the true position).
    pub best_start: usize,
}

/// `[c(p)]_t = √E_s·Σ_m b_m(p) W̃_{m,t}`.
pub fn c_vector(
    position: &Vec3,
    ideal: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<CVector> {
    let b = b_vector(geom, p_bs, position)?;
    Ok(ideal.weights.tr_mul(&b) * C64::new(symbol_energy.sqrt(), 0.0))
}

/// `c(p)†·target`.
pub fn optimal_alpha(c: &CVector, target: &CVector) -> Result<C64> {
    if c.len() != target.len() {
        return Err(Error::Dimension("c(p) and target lengths differ".into()));
    }
    Ok(single_column_fit(c.as_slice(), target.as_slice())?.0)
}

/// `‖μ(η̄) − μ̃(η)‖` with the true profile on the left and the ideal one on the right.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_norm(
    gain: ChannelGain,
    position: &Vec3,
    true_gain: ChannelGain,
    true_position: &Vec3,
    true_w: &ProfileMatrix,
    ideal_w: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
) -> Result<f64> {
    let mu = noiseless_mean(true_gain, true_position, true_w, geom, p_bs, symbol_energy)?;
    let mt = noiseless_mean(gain, position, ideal_w, geom, p_bs, symbol_energy)?;
    Ok((mu - mt).norm())
}

struct Problem<'a> {
    mu: &'a CVector,
    mu_norm: f64,
    ideal: &'a ProfileMatrix,
    geom: &'a RisGeometry,
    p_bs: &'a Vec3,
    es: f64,
}

impl Problem<'_> {
    /// Relative residual `‖Π⊥_{c(p)} μ‖ / ‖μ‖`; infinite at invalid positions.
    fn cost(&self, p: &Vec3) -> f64 {
        if p.z <= self.geom.center().z {
            return f64::INFINITY;
        }
        let c = match c_vector(p, self.ideal, self.geom, self.p_bs, self.es) {
            Ok(c) => c,
            Err(_) => return f64::INFINITY,
        };
        match single_column_fit(c.as_slice(), self.mu.as_slice()) {
            Ok((a, _)) => (self.mu - c * a).norm() / self.mu_norm,
            Err(_) => f64::INFINITY,
        }
    }
}

/// Minimise the assumed-model misfit over position, starting from the true
/// position and `n_restarts` points on a sphere around it.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_true(
    gain: ChannelGain,
    position: &Vec3,
    true_w: &ProfileMatrix,
    ideal_w: &ProfileMatrix,
    geom: &RisGeometry,
    p_bs: &Vec3,
    symbol_energy: f64,
    cfg: &SolverConfig,
) -> Result<PseudoTrueResult> {
    let mu = noiseless_mean(gain, position, true_w, geom, p_bs, symbol_energy)?;
    let mu_norm = mu.norm();
    if !(mu_norm > 0.0) {
        return Err(Error::DegenerateSignal("true mean is zero".into()));
    }
    let prob = Problem { mu: &mu, mu_norm, ideal: ideal_w, geom, p_bs, es: symbol_energy };

    let mut starts = vec![*position];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.n_restarts {
        let dir = loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        starts.push(position + dir * cfg.restart_radius);
    }

    let runs = par::map_slice(&starts, cfg.parallel, |s| {
        let first = nelder_mead(|p| prob.cost(p), s, cfg.initial_step, cfg.x_tol, cfg.max_evals);
        // restart at the optimum with a fresh small simplex
        let second = nelder_mead(|p| prob.cost(p), &first.0, cfg.initial_step * 1e-2, cfg.x_tol, cfg.max_evals);
        if second.1 <= first.1 {
            (second.0, second.1, first.2 + second.2)
        } else {
            (first.0, first.1, first.2 + second.2)
        }
    });

    let costs: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best = par::argmin_first(&costs)
        .filter(|&i| costs[i].is_finite())
        .ok_or_else(|| Error::NonConvergence("pseudo-true search found no finite residual".into()))?;
    let p0 = runs[best].0;
    let c = c_vector(&p0, ideal_w, geom, p_bs, symbol_energy)?;
    let alpha0 = optimal_alpha(&c, &mu)?;
    let residual = (&mu - c * alpha0).norm();
    Ok(PseudoTrueResult {
        eta0: ParamVector::new(alpha0, p0),
        residual,
        evaluations: runs.iter().map(|r| r.2).sum(),
        restarts: cfg.n_restarts,
        best_start: best,
    })
}

/// Nelder–Mead on `R³`. Returns `(best point, best value, evaluations)`.
pub(crate) fn nelder_mead<F: Fn(&Vec3) -> f64>(
    f: F,
    start: &Vec3,
    step: f64,
    x_tol: f64,
    max_evals: usize,
) -> (Vec3, f64, usize) {
    let mut simplex: Vec<(Vec3, f64)> = Vec::with_capacity(4);
    let mut evals = 0usize;
    let eval = |p: Vec3, evals: &mut usize| {
        *evals += 1;
        (p, f(&p))
    };
    simplex.push(eval(*start, &mut evals));
    for i in 0..3 {
        let mut p = *start;
        p[i] += step;
        simplex.push(eval(p, &mut evals));
    }
    let order = |s: &mut Vec<(Vec3, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    while evals < max_evals {
        let diam = simplex[1..].iter().map(|(p, _)| (p - simplex[0].0).norm()).fold(0.0, f64::max);
        if diam < x_tol {
            break;
        }
        let centroid = (simplex[0].0 + simplex[1].0 + simplex[2].0) / 3.0;
        let worst = simplex[3];
        let refl = eval(centroid + (centroid - worst.0), &mut evals);
        if refl.1 < simplex[0].1 {
            let exp = eval(centroid + 2.0 * (centroid - worst.0), &mut evals);
            simplex[3] = if exp.1 < refl.1 { exp } else { refl };
        } else if refl.1 < simplex[2].1 {
            simplex[3] = refl;
        } else {
            let contr = if refl.1 < worst.1 {
                eval(centroid + 0.5 * (refl.0 - centroid), &mut evals)
            } else {
                eval(centroid + 0.5 * (worst.0 - centroid), &mut evals)
            };
            if contr.1 < refl.1.min(worst.1) {
                simplex[3] = contr;
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    *v = eval(best + 0.5 * (v.0 - best), &mut evals);
                }
            }
        }
        order(&mut simplex);
    }
    (simplex[0].0, simplex[0].1, evals)
}
