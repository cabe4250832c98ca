use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use risloc::estimators::{AmmlConfig, AmmlEstimator, Branch, SearchGrids};
use risloc::geometry::{wavelength, RisGeometry, Vec3};
use risloc::harness::{run_rmse_sweep, ExperimentConfig};
use risloc::ris_model::{profile_matrix, PhaseSchedule, RisAmplitudeParams};
use risloc::signal::{noiseless_mean, observe_seeded, solve_noise_for_snr};
use risloc::C64;

fn estimator(parallel: bool) -> (AmmlEstimator, risloc::CVector) {
    let g = RisGeometry::upa(16, 16, 0.5, wavelength(28e9), Vec3::zeros()).unwrap();
    let hi = g.fresnel_bounds().unwrap().1;
    let s3 = 3f64.sqrt();
    let ue = Vec3::new(1.0, 1.0, 1.0) * (0.187 * hi / s3);
    let bs = Vec3::new(-1.0, 1.0, 1.0) * (0.373 * hi / s3);
    let s = PhaseSchedule::random(g.len(), 50, 1).unwrap();
    let mut cfg = AmmlConfig::new(SearchGrids::new(90, 100, 32, g.fresnel_bounds().unwrap(), 2).unwrap(), 20);
    cfg.parallel = parallel;
    let w = profile_matrix(&s, &RisAmplitudeParams { beta_min: 0.5, kappa: 1.5, phi: 0.0 }, false);
    let mu = noiseless_mean(C64::new(1.0, 0.0), &ue, &w, &g, &bs, 1.0).unwrap();
    let n0 = solve_noise_for_snr(30.0, C64::new(1.0, 0.0), &ue, &w, &g, &bs, 1.0).unwrap();
    let y = observe_seeded(&mu, n0, 1.0, 2).unwrap().vector();
    (AmmlEstimator::new(&g, &bs, &s, &RisAmplitudeParams::IDEAL, true, 1.0, cfg).unwrap(), y)
}

fn grid_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("amml-16x16");
    group.sample_size(10);
    for parallel in [false, true] {
        let (est, y) = estimator(parallel);
        let label = if parallel { "parallel" } else { "sequential" };
        for branch in [Branch::Jacobi, Branch::Alternating] {
            group.bench_with_input(BenchmarkId::new(format!("{branch:?}"), label), &y, |b, y| {
                b.iter(|| est.estimate_with(y, branch).unwrap())
            });
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("rmse-sweep-8x8");
    group.sample_size(10);
    for parallel in [false, true] {
        let mut cfg = ExperimentConfig::fast();
        cfg.geometry.rows = 8;
        cfg.geometry.cols = 8;
        cfg.scene.transmissions = 20;
        cfg.scene.p_ue = [0.074; 3];
        cfg.scene.p_bs = [-0.148, 0.148, 0.148];
        cfg.estimator.order = 6;
        cfg.estimator.grids.k_angle = 40;
        cfg.estimator.grids.k_dist = 40;
        cfg.estimator.grids.l_calib = 16;
        cfg.sweep.snr_db = vec![30.0];
        cfg.run.trials = 8;
        cfg.run.scenarios = vec![risloc::bounds::Scenario::II];
        cfg.run.parallel = parallel;
        let label = if parallel { "parallel" } else { "sequential" };
        group.bench_function(label, |b| b.iter(|| run_rmse_sweep(&cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, grid_search, monte_carlo);
criterion_main!(benches);
