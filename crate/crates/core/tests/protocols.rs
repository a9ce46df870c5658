//! End-to-end synthesis on small grids with weak walls.

use quasiwall_core::protocols::*;
use quasiwall_core::*;

fn weak() -> Settings {
    Settings::new(SpatialGrid::new(255).unwrap(), 25.0, 30.0).unwrap()
}

fn mix(grid: SpatialGrid, coeffs: &[Complex64]) -> WaveFunction {
    let mut psi = WaveFunction::zeros(grid);
    for (k, c) in coeffs.iter().enumerate() {
        psi.add_scaled(*c, &WaveFunction::sine_mode(grid, k + 1)).unwrap();
    }
    psi
}

/// Largest `|d/dt|` of any wall parameter, by central differences.
fn sampled_rate(path: &ControlPath) -> f64 {
    let mut worst: f64 = 0.0;
    let mut t0 = 0.0;
    for stage in path.stages() {
        let d = stage.duration();
        let h = 1e-4 * d;
        for i in 1..10_000 {
            let t = i as f64 * 1e-4 * d;
            let (lo, hi) = (stage.walls_at(t - 0.5 * h), stage.walls_at(t + 0.5 * h));
            for (a, b) in lo.iter().zip(&hi) {
                for (x, y) in [(a.height, b.height), (a.sharpness, b.sharpness), (a.position, b.position)] {
                    worst = worst.max((y - x).abs() / h);
                }
            }
        }
        t0 += d;
    }
    assert!((t0 - path.duration()).abs() < 1e-9 * t0.max(1.0));
    worst
}

#[test]
fn theorem1_path_swaps_the_two_lowest_modes() {
    let settings = weak();
    let (eps, kappa) = (0.5, 20.0);
    let (path, plan) = build_theorem1_path(0.43, 0.57, 2, eps, kappa, &settings).unwrap();
    let grid = settings.grid;
    for k in 1..=2 {
        let out = propagate(&WaveFunction::sine_mode(grid, k), &path, settings.dt_target).unwrap();
        let target = WaveFunction::sine_mode(grid, plan.sigma.images()[k - 1] as usize);
        let overlap = target.inner(&out).unwrap().norm();
        assert!(overlap >= 1.0 - eps, "k={k}: overlap {overlap}");
    }
    assert!(sampled_rate(&path) <= kappa * (1.0 + 1e-6));
    let json = path.to_json();
    assert_eq!(ControlPath::from_json(&json).unwrap(), path);
    // the per-stage errors stay within twice the budget
    let budget = (4 * plan.crossing_count() + 3) as f64 * plan.stage_tolerance;
    assert!(plan.measured_error_sum() <= 2.0 * budget, "{:?}", plan.stages);
}

#[test]
fn permutation_path_respects_the_rate_bound() {
    let settings = Settings::new(SpatialGrid::new(255).unwrap(), 25.0, 3e3).unwrap();
    let (path, report) = build_arbitrary_permutation_path(&[2, 1], 0.3, 500.0, &settings).unwrap();
    assert_eq!(report.extended, vec![2, 1]);
    assert!(sampled_rate(&path) <= 500.0 * (1.0 + 1e-6));
    let out = propagate(&WaveFunction::sine_mode(settings.grid, 1), &path, settings.dt_target).unwrap();
    let overlap = WaveFunction::sine_mode(settings.grid, 2).inner(&out).unwrap().norm();
    assert!(overlap >= 0.7, "overlap {overlap}");
}

#[test]
fn theorem3_between_two_mode_states() {
    let settings = weak();
    let grid = settings.grid;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u_i = mix(grid, &[Complex64::new(s, 0.0), Complex64::new(0.0, s)]);
    let u_f = mix(grid, &[Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0)]);
    let eps = 0.3;
    let (path, report) = build_theorem3_path(&u_i, &u_f, eps, 5.0, &settings).unwrap();
    assert_eq!(report.modes, 2);
    assert!(report.reverse.is_some());
    let out = propagate(&u_i, &path, settings.dt_target).unwrap();
    assert!((out.norm() - u_i.norm()).abs() <= 1e-8);
    let error = out.distance(&u_f).unwrap();
    assert!(error <= eps, "error {error}");
    assert!((error - report.error).abs() < 1e-9);
}

#[test]
fn theorem3_from_the_fundamental_to_itself() {
    let settings = weak();
    let u = WaveFunction::sine_mode(settings.grid, 1);
    let (path, report) = build_theorem3_path(&u, &u, 0.2, 5.0, &settings).unwrap();
    assert!(report.reverse.is_none());
    assert_eq!(path.stages().len(), 1);
    let out = propagate(&u, &path, settings.dt_target).unwrap();
    assert!(out.distance(&u).unwrap() <= 0.2);
}

#[test]
fn unequal_label_densities_drive_growth() {
    use rand::{Rng, SeedableRng};
    use quasiwall_core::spectral::xi;
    let left_share = |a: f64| (1..=200u64).filter(|&k| xi(k, a).unwrap() == 1).count() as f64 / 200.0;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    while tested < 10 {
        let a_i: f64 = rng.gen_range(0.05..0.95);
        let a_f: f64 = rng.gen_range(0.05..0.95);
        if (left_share(a_i) - left_share(a_f)).abs() < 0.2 {
            continue;
        }
        let mut increments = Vec::new();
        for k0 in 1..=30u64 {
            match growth_exact(a_i, a_f, k0, 40) {
                Ok(o) if o.kind == OrbitKind::Open => increments.extend(o.log_increments),
                Ok(_) => {}
                Err(quasiwall_core::Error::ClosureExceeded { partial, .. }) => {
                    increments.extend(partial.windows(2).map(|w| (w[1] as f64 / w[0] as f64).ln()))
                }
                Err(e) => panic!("{e}"),
            }
        }
        if increments.is_empty() {
            continue;
        }
        tested += 1;
        let mean = increments.iter().sum::<f64>() / increments.len() as f64;
        assert!(mean > 0.0, "a_i={a_i} a_f={a_f}: mean increment {mean}");
    }
}
