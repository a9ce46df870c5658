use std::f64::consts::PI;

use quasiwall_core::control::wait_stage;
use quasiwall_core::propagate::propagate_stages;
use quasiwall_core::spectral::ideal_eigenfunction;
use quasiwall_core::*;

fn decomposition(height: f64, eta: f64, a: f64, m: usize) -> (SpatialGrid, SpectralDecomposition) {
    let grid = SpatialGrid::resolving(eta);
    let h = assemble(&PotentialField::single(height, eta, a).unwrap(), &grid).unwrap();
    (grid, lowest_eigenpairs(&h, m).unwrap())
}

/// Split-interval eigenvalues, merged by brute force.
fn split(a: f64, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> =
        (1..=m).flat_map(|p| [(p as f64 * PI / a).powi(2), (p as f64 * PI / (1.0 - a)).powi(2)]).collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.truncate(m);
    v
}

#[test]
fn wall_eigenvalues_stay_below_the_min_max_bound() {
    for a in [0.3, 0.43, 0.6] {
        for eta in [50.0, 200.0] {
            for height in [eta, 4e4] {
                let (_, d) = decomposition(height, eta, a, 4);
                for (k, (l, ideal)) in d.eigenvalues().iter().zip(split(a, 4)).enumerate() {
                    let k = (k + 1) as f64;
                    let bound = ideal * (1.0 + 2.0 * k * height / (a.min(1.0 - a) * eta * eta)) + 0.01 * ideal;
                    assert!(*l <= bound, "a={a} eta={eta} I={height} k={k}: {l} > {bound}");
                }
            }
        }
    }
}

#[test]
fn eigenfunctions_converge_like_inverse_root_eta() {
    // at a = 0.43 the two lowest modes are Right 1 and Left 1
    let a = 0.43;
    let labels = [ModeLabel::right(1), ModeLabel::left(1)];
    let etas = [100.0, 200.0, 400.0, 800.0];
    let mut scaled = vec![Vec::new(); 2];
    let mut on_wall = vec![Vec::new(); 2];
    for &eta in &etas {
        let (grid, d) = decomposition(eta, eta, a, 2);
        let support = grid.indices_within(a - 1.0 / eta, a + 1.0 / eta);
        for (k, label) in labels.iter().enumerate() {
            let phi = d.mode(k);
            let ideal = ideal_eigenfunction(*label, a, &grid);
            scaled[k].push(phi.phase_aligned_distance(&ideal).unwrap() * eta.sqrt());
            let peak = support.clone().map(|i| phi.values()[i].norm()).fold(0.0, f64::max);
            on_wall[k].push(peak * eta.sqrt());
        }
    }
    for k in 0..2 {
        for w in scaled[k].windows(2) {
            let r = w[1] / w[0];
            assert!((0.5..=2.0).contains(&r), "mode {k}: C sequence {:?}", scaled[k]);
        }
        for w in on_wall[k].windows(2) {
            assert!(w[1] <= 2.0 * w[0], "mode {k}: wall values {:?}", on_wall[k]);
        }
    }
}

#[test]
fn static_modes_rotate_at_their_eigenvalue() {
    // the Crank-Nicolson phase lags by about lambda^3 dt^2 / 12 per unit time
    let (_, d) = decomposition(4e4, 200.0, 0.43, 2);
    let walls = [WallState::new(4e4, 200.0, 0.43).unwrap()];
    let t = 1.0;
    let stage = wait_stage(&walls, t).unwrap().with_tracked_energy(d.eigenvalues()[1]);
    for k in 0..2 {
        let phi = d.mode(k);
        let out = propagate_stages(&phi, std::slice::from_ref(&stage), 5e-5).unwrap();
        let phase = phi.inner(&out).unwrap().arg();
        let want = -d.eigenvalues()[k] * t;
        let diff = (phase - want).rem_euclid(2.0 * PI);
        let diff = diff.min(2.0 * PI - diff);
        assert!(diff <= 1e-4 * t, "mode {k}: phase error {diff}");
    }
}
