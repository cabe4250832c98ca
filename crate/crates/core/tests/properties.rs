mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use risloc::bessel::bessel_j_upto;
use risloc::bounds::{fim, mcrb_matrices, pseudo_true, Scenario, SolverConfig};
use risloc::estimators::grids::{search_1d, zoom_points, Domain};
use risloc::estimators::{AmmlConfig, AmmlEstimator, Branch, SearchGrids};
use risloc::geometry::{wrap_azimuth, RisGeometry, SphericalCoords, Vec3};
use risloc::harness::{derive_seed, rmse_with_se, ExperimentConfig, Stream};
use risloc::linalg::{projection_objective, single_column_fit, single_column_residual};
use risloc::ris_model::{beta, profile_matrix, PhaseSchedule, RisAmplitudeParams};
use risloc::signal::{noiseless_mean, snr_db, solve_noise_for_snr, ParamVector};
use risloc::{CMatrix, CVector, C64};

fn zeta_strategy() -> impl Strategy<Value = RisAmplitudeParams> {
    (0.0..=1.0f64, 0.0..4.0f64, 0.0..TAU).prop_map(|(b, k, p)| RisAmplitudeParams { beta_min: b, kappa: k, phi: p })
}

fn tiny() -> (RisGeometry, Vec3, Vec3) {
    let sc = common::scene(8);
    (sc.geom, sc.bs, sc.ue)
}

fn solver() -> SolverConfig {
    SolverConfig { restart_radius: 0.02, initial_step: 0.005, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_entries_have_unit_modulus(d in 0.2..5.0f64, el in 0.0..FRAC_PI_2, az in 0.0..TAU) {
        let g = RisGeometry::upa(6, 5, 0.5, 0.0107, Vec3::zeros()).unwrap();
        let p = g.spherical_to_position(&SphericalCoords { distance: d, elevation: el, azimuth: az });
        for v in g.near_field_steering(&p).unwrap().iter().chain(g.far_field_steering(el, az).unwrap().iter()) {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_field_is_periodic_in_azimuth(el in 0.0..FRAC_PI_2, az in 0.0..TAU) {
        let g = RisGeometry::upa(5, 5, 0.5, 0.0107, Vec3::zeros()).unwrap();
        let a = g.far_field_steering(el, az).unwrap();
        let b = g.far_field_steering(el, az + TAU).unwrap();
        prop_assert!((a - b).camax() < 1e-9);
    }

    #[test]
    fn near_field_approaches_far_field(el in 0.1..1.4f64, az in 0.0..TAU) {
        let g = RisGeometry::upa(6, 6, 0.5, 0.0107, Vec3::zeros()).unwrap();
        let d0 = g.aperture().unwrap();
        let ff = g.far_field_steering(el, az).unwrap();
        let dev: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|m| {
                let p = g.spherical_to_position(&SphericalCoords { distance: m * d0, elevation: el, azimuth: az });
                (g.near_field_steering(&p).unwrap() - &ff).camax()
            })
            .collect();
        prop_assert!(dev[1] < dev[0] && dev[2] < dev[1], "{dev:?}");
    }

    #[test]
    fn spherical_round_trip(d in 0.01..100.0f64, el in 0.0..FRAC_PI_2, az in 0.0..TAU) {
        let g = RisGeometry::upa(3, 3, 0.5, 0.01, Vec3::zeros()).unwrap();
        let s = SphericalCoords { distance: d, elevation: el, azimuth: az };
        let p = g.spherical_to_position(&s);
        prop_assume!(p.z > 0.0);
        let back = g.position_to_spherical(&p).unwrap();
        let q = g.spherical_to_position(&back);
        prop_assert!((p - q).norm() <= 1e-12 * d.max(1.0));
        prop_assert!((back.distance - d).abs() <= 1e-12 * d.max(1.0));
        prop_assert!((0.0..TAU).contains(&back.azimuth));
    }

    #[test]
    fn azimuth_wrap_is_half_open(a in -100.0..100.0f64) {
        let w = wrap_azimuth(a);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(((w - a) / TAU - ((w - a) / TAU).round()).abs() < 1e-9);
    }

    #[test]
    fn amplitude_is_bounded_periodic_and_peaks_at_quarter_turn(z in zeta_strategy(), th in -20.0..20.0f64) {
        let b = beta(th, &z);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(b >= z.beta_min - 1e-15);
        prop_assert!((beta(th + TAU, &z) - b).abs() < 1e-9);
        let peak = beta(z.phi + FRAC_PI_2, &z);
        prop_assert!((peak - 1.0).abs() < 1e-12, "peak {peak}");
    }

    #[test]
    fn amplitude_is_monotone_in_beta_min(z in zeta_strategy(), other in 0.0..=1.0f64, th in -PI..PI) {
        let (lo, hi) = if other < z.beta_min { (other, z.beta_min) } else { (z.beta_min, other) };
        let a = beta(th, &RisAmplitudeParams { beta_min: lo, ..z });
        let b = beta(th, &RisAmplitudeParams { beta_min: hi, ..z });
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn profile_columns_have_bounded_norm(z in zeta_strategy(), seed in 0u64..1000) {
        let s = PhaseSchedule::random(20, 6, seed).unwrap();
        let w = profile_matrix(&s, &z, false);
        let root_m = 20f64.sqrt();
        for c in w.weights.column_iter() {
            prop_assert!(c.norm() <= root_m * (1.0 + 1e-12));
        }
        let ideal = profile_matrix(&s, &z, true);
        for c in ideal.weights.column_iter() {
            prop_assert!((c.norm() - root_m).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_is_linear_in_gain(re in -3.0..3.0f64, im in -3.0..3.0f64, seed in 0u64..100) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 5, seed).unwrap();
        let w = profile_matrix(&s, &RisAmplitudeParams { beta_min: 0.4, kappa: 1.5, phi: 0.2 }, false);
        let a = C64::new(re, im);
        let m1 = noiseless_mean(a, &ue, &w, &g, &bs, 1.0).unwrap();
        let m2 = noiseless_mean(a * 2.0, &ue, &w, &g, &bs, 1.0).unwrap();
        prop_assert_eq!(m2, m1 * C64::new(2.0, 0.0));
    }

    #[test]
    fn unit_beta_min_models_coincide(k in 0.0..4.0f64, phi in 0.0..TAU, seed in 0u64..100) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 5, seed).unwrap();
        let z = RisAmplitudeParams { beta_min: 1.0, kappa: k, phi };
        let a = noiseless_mean(C64::new(0.3, 0.2), &ue, &profile_matrix(&s, &z, false), &g, &bs, 1.0).unwrap();
        let b = noiseless_mean(C64::new(0.3, 0.2), &ue, &profile_matrix(&s, &z, true), &g, &bs, 1.0).unwrap();
        prop_assert!((a - b).camax() < 1e-15);
    }

    #[test]
    fn snr_ignores_gain_phase(rot in 0.0..TAU, n0 in 1e-4..1.0f64) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 7, 3).unwrap();
        let w = profile_matrix(&s, &RisAmplitudeParams { beta_min: 0.5, kappa: 1.5, phi: 0.0 }, false);
        let a = snr_db(C64::new(0.7, 0.0), &ue, &w, &g, &bs, 1.0, n0).unwrap();
        let b = snr_db(C64::from_polar(0.7, rot), &ue, &w, &g, &bs, 1.0, n0).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn projection_ignores_column_scale(seed in 0u64..1000, sre in -5.0..5.0f64, sim in -5.0..5.0f64) {
        prop_assume!(sre.abs() + sim.abs() > 1e-3);
        let s = PhaseSchedule::random(6, 2, seed).unwrap();
        let x = CMatrix::from_fn(6, 2, |i, j| C64::from_polar(1.0 + i as f64 * 0.1, s.phases()[(i, j)]));
        let y = CVector::from_fn(6, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let a = projection_objective(&x, &y).unwrap();
        let b = projection_objective(&(&x * C64::new(sre, sim)), &y).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * y.norm());
        prop_assert!(a <= y.norm() * (1.0 + 1e-12));
        let (alpha, xx) = single_column_fit(x.column(0).as_slice(), y.as_slice()).unwrap();
        let resid = &y - x.column(0) * alpha;
        prop_assert!((x.column(0).norm_squared() - xx).abs() < 1e-12 * xx);
        prop_assert!((resid.norm() - single_column_residual(x.column(0).as_slice(), y.as_slice()).unwrap()).abs() < 1e-10);
        prop_assert!(x.column(0).dotc(&resid).norm() < 1e-10);
    }

    #[test]
    fn bessel_identities(x in 0.0..60.0f64) {
        let j = bessel_j_upto(120, x);
        let neumann: f64 = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        prop_assert!((neumann - 1.0).abs() < 1e-10);
        for n in 1..100 {
            // J_{n−1} + J_{n+1} = (2n/x)·J_n
            let lhs = j[n - 1] + j[n + 1];
            let rhs = 2.0 * n as f64 / x * j[n];
            if x > 1e-3 {
                prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "n={n}");
            }
        }
    }

    #[test]
    fn zooms_stay_in_domain(c in 0.0..1.0f64, h in 1e-4..0.5f64) {
        for v in zoom_points(c, h, Domain::Interval(0.0, 1.0)) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for v in zoom_points(c * TAU, h, Domain::Periodic) {
            prop_assert!((0.0..TAU).contains(&v));
        }
    }

    #[test]
    fn line_search_reaches_refined_resolution(t in 0.05..0.95f64, levels in 0usize..4) {
        let grid: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
        let h = 1.0 / 40.0;
        let (x, _) = search_1d(&grid, h, Domain::Interval(0.0, 1.0), levels, false, |x| (x - t).powi(2)).unwrap();
        prop_assert!((x - t).abs() <= h / 5f64.powi(levels as i32) / 2.0 + 1e-12);
    }

    #[test]
    fn rmse_standard_error_is_well_behaved(v in proptest::collection::vec(0.0..10.0f64, 1..50), s in 0.1..10.0f64) {
        let (r, se) = rmse_with_se(&v).unwrap();
        prop_assert!(r >= 0.0 && se >= 0.0);
        let scaled: Vec<f64> = v.iter().map(|e| e * s * s).collect();
        let (r2, se2) = rmse_with_se(&scaled).unwrap();
        prop_assert!((r2 - r * s).abs() <= 1e-9 * (1.0 + r2));
        prop_assert!((se2 - se * s).abs() <= 1e-9 * (1.0 + se2));
    }

    #[test]
    fn seeds_depend_on_every_input(m in 0u64..1000, a in 0u64..1000, b in 0u64..1000) {
        let s = derive_seed(m, Stream::Noise, a, b);
        prop_assert_eq!(s, derive_seed(m, Stream::Noise, a, b));
        prop_assert_ne!(s, derive_seed(m, Stream::Noise, a, b + 1));
        prop_assert_ne!(s, derive_seed(m, Stream::Noise, a + 1, b));
        prop_assert_ne!(s, derive_seed(m + 1, Stream::Noise, a, b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lb_dominates_mcrb_and_mcrb_is_psd(b in 0.2..0.9f64, k in 0.5..3.0f64, seed in 0u64..50) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 10, seed).unwrap();
        let z = RisAmplitudeParams { beta_min: b, kappa: k, phi: 0.0 };
        let tw = profile_matrix(&s, &z, false);
        let iw = profile_matrix(&s, &z, true);
        let gain = C64::new(1.0, 0.0);
        let pt = pseudo_true(gain, &ue, &tw, &iw, &g, &bs, 1.0, &solver()).unwrap();
        let n0 = solve_noise_for_snr(20.0, gain, &ue, &tw, &g, &bs, 1.0).unwrap();
        let rep = mcrb_matrices(&pt.eta0, &ParamVector::new(gain, ue), &tw, &iw, &g, &bs, 1.0, n0).unwrap();
        let scale = rep.lb.norm();
        let m_eig = rep.mcrb.clone().symmetric_eigen().eigenvalues;
        let d_eig = (&rep.lb - &rep.mcrb).symmetric_eigen().eigenvalues;
        prop_assert!(m_eig.min() >= -1e-10 * scale);
        prop_assert!(d_eig.min() >= -1e-10 * scale);
    }

    #[test]
    fn bound_tends_to_bias_at_high_snr(b in 0.2..0.8f64, seed in 0u64..50) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 10, seed).unwrap();
        let z = RisAmplitudeParams { beta_min: b, kappa: 1.5, phi: 0.0 };
        let tw = profile_matrix(&s, &z, false);
        let iw = profile_matrix(&s, &z, true);
        let gain = C64::new(1.0, 0.0);
        let pt = pseudo_true(gain, &ue, &tw, &iw, &g, &bs, 1.0, &solver()).unwrap();
        let truth = ParamVector::new(gain, ue);
        let mut last_mcrb = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        let mut bias = None;
        for snr in [20.0, 30.0, 40.0, 60.0] {
            let n0 = solve_noise_for_snr(snr, gain, &ue, &tw, &g, &bs, 1.0).unwrap();
            let r = mcrb_matrices(&pt.eta0, &truth, &tw, &iw, &g, &bs, 1.0, n0).unwrap();
            if let Some(b0) = &bias {
                prop_assert_eq!(b0, &r.bias_outer);
            }
            bias = Some(r.bias_outer.clone());
            let gap = r.pos_rmse_bound - r.bias_norm;
            prop_assert!(r.mcrb.trace() < last_mcrb);
            prop_assert!(gap >= -1e-15 && gap < last_gap);
            last_mcrb = r.mcrb.trace();
            last_gap = gap;
        }
    }

    #[test]
    fn pseudo_true_is_tiling_invariant(b in 0.2..0.8f64, seed in 0u64..50, k in 2usize..4) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 8, seed).unwrap();
        let t = s.tile(k).unwrap();
        let z = RisAmplitudeParams { beta_min: b, kappa: 1.5, phi: 0.0 };
        let gain = C64::new(1.0, 0.0);
        let run = |s: &PhaseSchedule| {
            pseudo_true(gain, &ue, &profile_matrix(s, &z, false), &profile_matrix(s, &z, true), &g, &bs, 1.0, &solver()).unwrap()
        };
        let (a, c) = (run(&s), run(&t));
        let scaled = a.residual * (k as f64).sqrt();
        prop_assert!((scaled - c.residual).abs() < 1e-6 * scaled.max(1e-12), "{} vs {}", scaled, c.residual);
        prop_assert!((a.eta0.position - c.eta0.position).norm() < 1e-6, "{:e}", (a.eta0.position - c.eta0.position).norm());
    }

    #[test]
    fn crb_of_tiled_schedule_shrinks_by_tiling_factor(seed in 0u64..50, k in 2usize..5) {
        let (g, bs, ue) = tiny();
        let s = PhaseSchedule::random(64, 8, seed).unwrap();
        let z = RisAmplitudeParams { beta_min: 0.5, kappa: 1.5, phi: 0.0 };
        let gain = C64::new(1.0, 0.0);
        let a = fim(gain, &ue, &s, &z, &g, &bs, 1.0, 1e-3, Scenario::III).unwrap();
        let b = fim(gain, &ue, &s.tile(k).unwrap(), &z, &g, &bs, 1.0, 1e-3, Scenario::III).unwrap();
        prop_assert!((b.crb.trace() / a.crb.trace() * k as f64 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn estimate_ignores_observation_scale(seed in 0u64..200, re in -3.0..3.0f64, im in -3.0..3.0f64) {
        prop_assume!(re.abs() + im.abs() > 0.1);
        let sc = common::scene(4);
        let s = PhaseSchedule::random(16, 12, seed).unwrap();
        let grids = SearchGrids::new(24, 24, 8, sc.geom.fresnel_bounds().unwrap(), 1).unwrap();
        let est = AmmlEstimator::new(&sc.geom, &sc.bs, &s, &RisAmplitudeParams::IDEAL, true, 1.0, AmmlConfig::new(grids, 6)).unwrap();
        let z = RisAmplitudeParams { beta_min: 0.5, kappa: 1.5, phi: 0.0 };
        let y = noiseless_mean(C64::new(1.0, 0.0), &sc.ue, &profile_matrix(&s, &z, false), &sc.geom, &sc.bs, 1.0).unwrap();
        let a = est.estimate_with(&y, Branch::Alternating).unwrap();
        let b = est.estimate_with(&(&y * C64::new(re, im)), Branch::Alternating).unwrap();
        prop_assert_eq!(a.position, b.position);
    }

    #[test]
    fn config_survives_toml(trials in 1usize..500, seed in any::<u64>(), b in 0.0..=1.0f64) {
        let mut c = ExperimentConfig::fast();
        c.run.trials = trials;
        c.run.seed = seed;
        c.scene.zeta.beta_min = b;
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        prop_assert_eq!(back.content_hash(), c.content_hash());
        prop_assert_eq!(back, c);
    }
}

#[test]
fn sandwich_terms_match_monte_carlo() {
    use rand::SeedableRng;
    use risloc::bounds::{mean_derivatives, NPARAM};
    use risloc::signal::observe;

    let sc = common::scene(2);
    let s = PhaseSchedule::random(4, 8, 21).unwrap();
    let z = RisAmplitudeParams { beta_min: 0.4, kappa: 1.5, phi: 0.3 };
    let tw = profile_matrix(&s, &z, false);
    let iw = profile_matrix(&s, &z, true);
    let truth = ParamVector::new(C64::new(1.0, 0.0), sc.ue);
    // expansion point away from the pseudo-true value
    let eta = ParamVector::new(C64::new(0.7, 0.1), sc.ue + Vec3::new(1e-3, -2e-3, 1e-3));
    let n0 = solve_noise_for_snr(10.0, truth.gain, &sc.ue, &tw, &sc.geom, &sc.bs, 1.0).unwrap();
    let rep = mcrb_matrices(&eta, &truth, &tw, &iw, &sc.geom, &sc.bs, 1.0, n0).unwrap();

    let mu = noiseless_mean(truth.gain, &truth.position, &tw, &sc.geom, &sc.bs, 1.0).unwrap();
    let m0 = noiseless_mean(eta.gain, &eta.position, &iw, &sc.geom, &sc.bs, 1.0).unwrap();
    let d = mean_derivatives(eta.gain, &eta.position, &iw.weights, &sc.geom, &sc.bs, 1.0).unwrap();
    let c = 2.0 / n0;
    let draws = 100_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut a = nalgebra::DMatrix::<f64>::zeros(NPARAM, NPARAM);
    let mut b = nalgebra::DMatrix::<f64>::zeros(NPARAM, NPARAM);
    for _ in 0..draws {
        let r = observe(&mu, n0, 1.0, &mut rng).unwrap().vector() - &m0;
        let score = nalgebra::DVector::from_fn(NPARAM, |i, _| c * r.dotc(&d.first.column(i)).re);
        b += &score * score.transpose();
        for i in 0..NPARAM {
            for j in 0..NPARAM {
                a[(i, j)] += c * (r.dotc(d.second(i, j)).re - d.first.column(i).dotc(&d.first.column(j)).re);
            }
        }
    }
    a /= draws as f64;
    b /= draws as f64;
    let rel = |mc: &nalgebra::DMatrix<f64>, exact: &nalgebra::DMatrix<f64>| (mc - exact).norm() / exact.norm();
    assert!(rel(&a, &rep.a) < 0.05, "A off by {}", rel(&a, &rep.a));
    assert!(rel(&b, &rep.b) < 0.05, "B off by {}", rel(&b, &rep.b));
}

#[test]
fn doubling_the_array_roughly_doubles_search_time() {
    use std::time::Instant;
    let time = |cols: usize, branch: Branch| {
        let g = RisGeometry::upa(8, cols, 0.5, risloc::geometry::wavelength(28e9), Vec3::zeros()).unwrap();
        let sc = common::scene(8);
        let s = PhaseSchedule::random(g.len(), 40, 3).unwrap();
        let grids = SearchGrids::new(60, 60, 8, sc.geom.fresnel_bounds().unwrap(), 1).unwrap();
        let est = AmmlEstimator::new(&g, &sc.bs, &s, &RisAmplitudeParams::IDEAL, true, 1.0, AmmlConfig::new(grids, 12))
            .unwrap();
        let y = noiseless_mean(
            C64::new(1.0, 0.0),
            &sc.ue,
            &profile_matrix(&s, &RisAmplitudeParams::IDEAL, true),
            &g,
            &sc.bs,
            1.0,
        )
        .unwrap();
        (0..3)
            .map(|_| {
                let t = Instant::now();
                est.estimate_with(&y, branch).unwrap();
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    for branch in [Branch::Jacobi, Branch::Alternating] {
        let ratio = time(16, branch) / time(8, branch);
        assert!(ratio > 2.0 / 3.0 && ratio < 6.0, "{branch:?}: ratio {ratio}");
    }
}
