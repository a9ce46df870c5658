//! Simulation and control synthesis for a particle in a box driven by narrow,
//! slowly moving potential walls.
//!
//! * [`field`]: grid, wall profile and potentials.
//! * [`spectral`]: discrete Hamiltonians, eigenpairs, the ideal split-interval
//!   spectrum and the permutations induced by moving a split point.
//! * [`propagate`]: Crank-Nicolson time stepping.
//! * [`control`]: smooth, rate-bounded wall schedules.
//! * [`protocols`]: end-to-end constructions (eigenmode permutations,
//!   superpositions, state transfer) and the energy growth model.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod field;
pub mod propagate;
pub mod protocols;
pub mod spectral;

pub use num_complex::Complex64;

pub use control::{concat, ControlPath, CrossingStage, SmoothRamp, Stage, StageKind};
pub use error::{Error, Result};
pub use field::{potential_on_grid, rho, rho_eta, PotentialField, SpatialGrid, WallState};
pub use propagate::{fidelity, mode_overlaps, propagate, WaveFunction};
pub use spectral::{
    assemble, ideal_spectrum, lowest_eigenpairs, quasi_adiabatic_permutation, DiscreteHamiltonian,
    IdealSpectrum, ModeLabel, Permutation, Side, SpectralDecomposition,
};
