//! Discrete Hamiltonians, their low-lying eigenpairs, and the spectrum of the
//! ideal split-interval operator that they approach for tall, thin walls.

mod dump;
mod ideal;
pub mod tridiag;

pub use dump::{write_spectrum_csv, SpectrumRow};
pub use ideal::{
    check_non_crossing, crossing_permutation, crossing_points, crossings_along,
    ideal_eigenfunction, ideal_spectrum, ideal_values, label_at_rank, left_count, partial_sum,
    quasi_adiabatic_permutation, rank_of, track_rank, track_rank_by_crossings, tracked_closure,
    xi, Crossing, IdealMode, IdealSpectrum, ModeLabel, Permutation, Side, CLOSURE_CAP, TOL_CROSS,
};

use crate::error::{invalid, Error, Result};
use crate::field::{PotentialField, SpatialGrid};
use tridiag::SymTridiagonal;

/// Finite-difference `-d^2/dx^2 + V` with Dirichlet conditions: a symmetric
/// tridiagonal matrix with diagonal `2/h^2 + V_i` and constant off-diagonal
/// `-1/h^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHamiltonian {
    grid: SpatialGrid,
    diag: Vec<f64>,
    offdiag: f64,
}

impl DiscreteHamiltonian {
    pub fn free(grid: SpatialGrid) -> Self {
        let h = grid.spacing();
        Self { grid, diag: vec![2.0 / (h * h); grid.len()], offdiag: -1.0 / (h * h) }
    }

    pub fn from_potential(grid: SpatialGrid, potential: &[f64]) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(invalid("potential length does not match the grid"));
        }
        let mut hamiltonian = Self::free(grid);
        hamiltonian.diag.iter_mut().zip(potential).for_each(|(d, v)| *d += v);
        Ok(hamiltonian)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> f64 {
        self.offdiag
    }

    /// `(H u)_i = -(u_{i-1} - 2 u_i + u_{i+1}) / h^2 + V_i u_i`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.as_tridiagonal().apply(u, &mut out);
        out
    }

    pub fn as_tridiagonal(&self) -> SymTridiagonal {
        SymTridiagonal::new(self.diag.clone(), vec![self.offdiag; self.diag.len() - 1])
    }
}

/// Builds the discrete Hamiltonian for a potential field.
pub fn assemble(field: &PotentialField, grid: &SpatialGrid) -> Result<DiscreteHamiltonian> {
    let mut hamiltonian = DiscreteHamiltonian::free(*grid);
    field.accumulate(grid, &mut hamiltonian.diag)?;
    Ok(hamiltonian)
}

/// The `m` lowest eigenpairs of a discrete Hamiltonian.
///
/// Eigenvectors are normalized in the h-weighted norm `sqrt(h sum u_i^2)` and
/// their sign is fixed so that the first component above `1e-3` of the peak
/// magnitude is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    grid: SpatialGrid,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `k` (0-based) as a normalized complex wave function.
    pub fn mode(&self, k: usize) -> crate::propagate::WaveFunction {
        crate::propagate::WaveFunction::from_real(self.grid, &self.eigenvectors[k])
    }
}

const SIGN_THRESHOLD: f64 = 1e-3;
const INVERSE_ITERATIONS: usize = 3;
const MAX_REFINEMENTS: usize = 4;

/// Computes the `m` lowest eigenpairs by Sturm bisection and inverse iteration.
pub fn lowest_eigenpairs(hamiltonian: &DiscreteHamiltonian, m: usize) -> Result<SpectralDecomposition> {
    let grid = *hamiltonian.grid();
    let n = grid.len();
    if m == 0 || m > n / 4 {
        return Err(invalid(format!("requested {m} eigenpairs; need 1 <= m <= n/4 = {}", n / 4)));
    }
    let t = hamiltonian.as_tridiagonal();
    let values = t.lowest_eigenvalues(m);
    let top = values[m - 1].abs();
    for k in 0..m - 1 {
        let gap = values[k + 1] - values[k];
        let threshold = 1e-9 * top;
        if gap <= threshold {
            return Err(Error::NearDegenerate { k: k + 1, gap, threshold });
        }
    }

    let norm = t.norm_inf();
    let h = grid.spacing();
    let scale = 1.0 / h.sqrt();
    let mut unit: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut tv = vec![0.0; n];
    for (k, &lambda) in values.iter().enumerate() {
        let target = 1e-8 * lambda.abs() + 64.0 * f64::EPSILON * norm;
        let mut iterations = INVERSE_ITERATIONS;
        let mut best = (f64::INFINITY, Vec::new());
        for _ in 0..MAX_REFINEMENTS {
            let v = t.inverse_iteration(lambda, &unit, iterations);
            t.apply(&v, &mut tv);
            // residual in the h-weighted norm of the h-normalized vector
            let residual =
                tv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            if residual < best.0 {
                best = (residual, v);
            }
            if best.0 <= target {
                break;
            }
            iterations *= 2;
        }
        if best.0 > target {
            return Err(Error::ConvergenceFailure { mode: k + 1, residual: best.0, target });
        }
        unit.push(best.1);
    }

    let eigenvectors = unit
        .into_iter()
        .map(|v| {
            let mut phi: Vec<f64> = v.into_iter().map(|x| x * scale).collect();
            fix_sign(&mut phi);
            phi
        })
        .collect();
    Ok(SpectralDecomposition { grid, eigenvalues: values, eigenvectors })
}

fn fix_sign(v: &mut [f64]) {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD * peak) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PotentialField;
    use std::f64::consts::PI;

    fn h_dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
        h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    #[test]
    fn stencil_arithmetic() {
        let grid = SpatialGrid::new(16).unwrap();
        let ham = DiscreteHamiltonian::free(grid);
        let h = grid.spacing();
        assert_eq!(ham.diag()[0], 2.0 / (h * h));
        assert_eq!(ham.offdiag(), -1.0 / (h * h));
        // n = 3 example scaled down: diag 2/h^2, off -1/h^2 with h = 1/4
        let t = SymTridiagonal::new(vec![32.0; 3], vec![-16.0; 2]);
        let mut out = vec![0.0; 3];
        t.apply(&[1.0, 1.0, 1.0], &mut out);
        assert_eq!(out, vec![16.0, 0.0, 16.0]);
    }

    #[test]
    fn free_lowest_matches_pi_squared() {
        let grid = SpatialGrid::new(255).unwrap();
        let dec = lowest_eigenpairs(&DiscreteHamiltonian::free(grid), 3).unwrap();
        let h = grid.spacing();
        for k in 0..3 {
            let exact = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * PI * h).cos());
            assert!((dec.eigenvalues()[k] - exact).abs() < 1e-9 * exact);
            let cont = ((k + 1) as f64 * PI).powi(2);
            assert!((dec.eigenvalues()[k] - cont).abs() < 0.005 * cont);
        }
    }

    #[test]
    fn free_eigenvectors_are_sines() {
        let grid = SpatialGrid::new(127).unwrap();
        let dec = lowest_eigenpairs(&DiscreteHamiltonian::free(grid), 4).unwrap();
        for k in 0..4 {
            let phi = &dec.eigenvectors()[k];
            for (i, x) in grid.points().enumerate() {
                let s = 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin();
                assert!((phi[i] - s).abs() < 1e-9, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn too_many_modes_rejected() {
        let grid = SpatialGrid::new(31).unwrap();
        assert!(lowest_eigenpairs(&DiscreteHamiltonian::free(grid), 8).is_err());
        assert!(lowest_eigenpairs(&DiscreteHamiltonian::free(grid), 7).is_ok());
    }

    #[test]
    fn tall_wall_orthonormal_and_residual() {
        let grid = SpatialGrid::new(2047).unwrap();
        let field = PotentialField::single(500.0, 100.0, 0.5).unwrap();
        let ham = assemble(&field, &grid).unwrap();
        let min = ham.diag().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 2.0 / grid.spacing().powi(2));
        let dec = lowest_eigenpairs(&ham, 6).unwrap();
        let h = grid.spacing();
        for j in 0..6 {
            for k in 0..6 {
                let g = h_dot(h, &dec.eigenvectors()[j], &dec.eigenvectors()[k]);
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "gram[{j}][{k}] = {g}");
            }
            let hv = ham.apply(&dec.eigenvectors()[j]);
            let lam = dec.eigenvalues()[j];
            let res = hv
                .iter()
                .zip(&dec.eigenvectors()[j])
                .map(|(a, b)| (a - lam * b).powi(2))
                .sum::<f64>()
                .mul_add(h, 0.0)
                .sqrt();
            assert!(res <= 1e-8 * lam, "residual {res}");
        }
    }

    #[test]
    fn wall_at_point_four_approaches_ideal_values() {
        let eta = 800.0;
        let grid = SpatialGrid::resolving(eta);
        let field = PotentialField::single(eta, eta, 0.4).unwrap();
        let dec = lowest_eigenpairs(&assemble(&field, &grid).unwrap(), 2).unwrap();
        let ideal = [PI * PI / 0.36, PI * PI / 0.16];
        for k in 0..2 {
            let e = (dec.eigenvalues()[k] - ideal[k]).abs();
            assert!(e < 5.0 / eta.sqrt() * ideal[k], "k={k} err={e}");
            assert!(dec.eigenvalues()[k] < ideal[k]);
        }
    }

    #[test]
    fn sign_convention_first_significant_positive() {
        let grid = SpatialGrid::new(511).unwrap();
        let field = PotentialField::single(2000.0, 60.0, 0.37).unwrap();
        let dec = lowest_eigenpairs(&assemble(&field, &grid).unwrap(), 5).unwrap();
        for v in dec.eigenvectors() {
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = v.iter().find(|x| x.abs() > 1e-3 * peak).unwrap();
            assert!(*first > 0.0);
        }
    }
}
