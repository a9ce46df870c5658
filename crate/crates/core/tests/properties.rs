use proptest::prelude::*;

use quasiwall_core::control::{concat, smooth_ramp, wait_stage, Stage, StageKind};
use quasiwall_core::propagate::{propagate_stages, step};
use quasiwall_core::protocols::{growth_step, GrowthIndex, GrowthModel, SuperpositionTarget};
use quasiwall_core::spectral::{crossing_permutation, partial_sum, track_rank, xi};
use quasiwall_core::*;

fn rotated(grid: SpatialGrid, coeffs: &[(f64, f64)]) -> WaveFunction {
    let mut psi = WaveFunction::zeros(grid);
    for (k, &(re, im)) in coeffs.iter().enumerate() {
        psi.add_scaled(Complex64::new(re, im), &WaveFunction::sine_mode(grid, k + 1)).unwrap();
    }
    psi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_is_even(s in -1.5f64..1.5) {
        prop_assert_eq!(rho(s), rho(-s));
        prop_assert!(rho(s) >= 0.0);
    }

    #[test]
    fn potential_is_linear_in_walls(
        h1 in 0.0f64..1e4, h2 in 0.0f64..1e4,
        a1 in 0.1f64..0.4, a2 in 0.6f64..0.9,
        eta in 20.0f64..60.0,
    ) {
        let grid = SpatialGrid::resolving(eta);
        let w1 = WallState::new(h1, eta, a1).unwrap();
        let w2 = WallState::new(h2, eta, a2).unwrap();
        let both = potential_on_grid(&PotentialField::new(vec![w1, w2]).unwrap(), &grid).unwrap();
        let one = potential_on_grid(&PotentialField::new(vec![w1]).unwrap(), &grid).unwrap();
        let two = potential_on_grid(&PotentialField::new(vec![w2]).unwrap(), &grid).unwrap();
        for i in 0..grid.len() {
            prop_assert!((both[i] - one[i] - two[i]).abs() <= 1e-9 * (1.0 + both[i].abs()));
        }
    }

    #[test]
    fn ramp_rate_stays_below_kappa(v0 in -100.0f64..100.0, v1 in -100.0f64..100.0, kappa in 0.01f64..1e3) {
        prop_assume!((v1 - v0).abs() > 1e-6);
        let r = smooth_ramp(v0, v1, kappa).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=10_000 {
            worst = worst.max(r.derivative(r.duration * i as f64 / 10_000.0).abs());
        }
        prop_assert!(worst <= kappa * (1.0 + 1e-9));
        prop_assert_eq!(r.value(0.0), v0);
        prop_assert_eq!(r.value(r.duration), v1);
    }

    #[test]
    fn one_step_preserves_norm(
        height in 0.0f64..4e4, a in 0.2f64..0.8, dt in 1e-5f64..1e-1,
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..5),
    ) {
        let grid = SpatialGrid::new(255).unwrap();
        let psi = rotated(grid, &coeffs);
        prop_assume!(psi.norm() > 1e-3);
        let field = PotentialField::single(height, 25.0, a).unwrap();
        let out = step(&psi, &field, dt).unwrap();
        prop_assert!((out.norm() / psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_path_undoes_propagation(
        a0 in 0.3f64..0.45, a1 in 0.55f64..0.7, height in 10.0f64..500.0, duration in 0.05f64..0.5,
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
    ) {
        let grid = SpatialGrid::new(255).unwrap();
        let psi = rotated(grid, &coeffs);
        prop_assume!(psi.norm() > 1e-3);
        let from = [WallState::new(height, 25.0, a0).unwrap()];
        let to = [WallState::new(0.5 * height, 25.0, a1).unwrap()];
        let path = concat(vec![
            Stage::between(StageKind::Horizontal, &from, &to, duration).unwrap(),
            wait_stage(&to, 0.3 * duration).unwrap(),
        ])
        .unwrap();
        let forward = propagate(&psi, &path, 1e-3).unwrap();
        let back = propagate(&forward.conj(), &path.reversed(), 1e-3).unwrap().conj();
        prop_assert!(fidelity(&back, &psi).unwrap() >= 1.0 - 1e-6);
        prop_assert!(back.distance(&psi).unwrap() <= 1e-9 * psi.norm());
    }

    #[test]
    fn permutation_oracles_agree(a_i in 0.02f64..0.98, a_f in 0.02f64..0.98, n in 1usize..=10) {
        let (Ok(x), Ok(y)) = (quasi_adiabatic_permutation(a_i, a_f, n), crossing_permutation(a_i, a_f, n)) else {
            // endpoint on a crossing
            return Ok(());
        };
        prop_assert_eq!(x, y);
    }

    #[test]
    fn permutations_compose(a in 0.05f64..0.95, b in 0.05f64..0.95, c in 0.05f64..0.95, k in 1u64..200) {
        let via = track_rank(track_rank(k, a, b).unwrap(), b, c).unwrap();
        prop_assert_eq!(via, track_rank(k, a, c).unwrap());
        // moving there and back is the identity
        prop_assert_eq!(track_rank(track_rank(k, a, b).unwrap(), b, a).unwrap(), k);
    }

    #[test]
    fn rank_balance_holds(a_i in 0.05f64..0.95, a_f in 0.05f64..0.95, k in 1u64..100_000) {
        let next = track_rank(k, a_i, a_f).unwrap();
        let side = xi(k, a_i).unwrap();
        prop_assert_eq!(
            k as i64 + side * partial_sum(k, a_i).unwrap(),
            next as i64 + side * partial_sum(next, a_f).unwrap()
        );
    }

    #[test]
    fn growth_step_uses_the_right_factor(beta in 0.05f64..0.95, gamma in 0.05f64..0.95, k in 1u64..1_000_000, u in 0.0f64..1.0) {
        let m = GrowthModel::new(beta, gamma, k).unwrap();
        let GrowthIndex::Exact(next) = growth_step(&m, u) else {
            return Err(TestCaseError::fail("small index left the exact range"));
        };
        let factor = if u < beta { beta / gamma } else { (1.0 - beta) / (1.0 - gamma) };
        prop_assert!(next >= 1);
        prop_assert!(next == 1 || (next as f64 - k as f64 * factor).abs() <= 0.5 + 1e-9 * k as f64 * factor);
    }

    #[test]
    fn truncated_targets_are_normalized(
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..=8),
        eps in 0.05f64..0.5,
    ) {
        let grid = SpatialGrid::new(255).unwrap();
        let psi = rotated(grid, &coeffs);
        prop_assume!(psi.norm() > 1e-2);
        let t = SuperpositionTarget::from_state(&psi, eps).unwrap();
        let mass: f64 = t.coefficients().iter().map(|c| c * c).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        // the dropped tail is within the allowance
        let kept = t.state(grid, psi.norm());
        prop_assert!(kept.distance(&psi).unwrap() <= 0.5 * eps * psi.norm() + 1e-9);
    }
}

#[test]
fn bump_mass_on_fine_grids() {
    for eta in [50.0, 100.0, 400.0] {
        let mut n = 31usize;
        while ((n + 1) as f64) < 32.0 * eta {
            n = 2 * n + 1;
        }
        let grid = SpatialGrid::new(n).unwrap();
        let h = grid.spacing();
        let mass: f64 = grid.points().map(|x| rho_eta(x - 0.5, eta)).sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-6, "eta {eta}: mass {mass}");
    }
}

#[test]
fn lowest_modes_are_simple() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let eta: f64 = rng.gen_range(20.0..200.0);
        let height: f64 = rng.gen_range(0.0..4e4);
        let a: f64 = rng.gen_range(0.1..0.9);
        let grid = SpatialGrid::resolving(eta);
        let h = assemble(&PotentialField::single(height, eta, a).unwrap(), &grid).unwrap();
        let values = lowest_eigenpairs(&h, 20).unwrap().eigenvalues().to_vec();
        let gap = values.windows(2).map(|w| (w[1] - w[0]) / w[1]).fold(f64::INFINITY, f64::min);
        assert!(gap > 1e-9, "I={height} eta={eta} a={a}: gap {gap}");
    }
}

#[test]
fn propagation_is_deterministic() {
    let grid = SpatialGrid::new(255).unwrap();
    let stage = Stage::between(
        StageKind::Horizontal,
        &[WallState::new(100.0, 25.0, 0.4).unwrap()],
        &[WallState::new(100.0, 25.0, 0.6).unwrap()],
        0.3,
    )
    .unwrap();
    let psi = WaveFunction::sine_mode(grid, 2);
    let a = propagate_stages(&psi, std::slice::from_ref(&stage), 1e-3).unwrap();
    let b = propagate_stages(&psi, std::slice::from_ref(&stage), 1e-3).unwrap();
    assert_eq!(a.values(), b.values());
}
