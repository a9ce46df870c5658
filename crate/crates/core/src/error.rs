use thiserror::Error;

use crate::spectral::ModeLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while assembling, solving, propagating or
/// synthesizing controls.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid spacing {h:.3e} does not resolve a wall of sharpness {eta} (need h <= {limit:.3e})")]
    UnderResolved { h: f64, eta: f64, limit: f64 },

    #[error("eigensolver did not converge for mode {mode}: residual {residual:.3e} > {target:.3e}")]
    ConvergenceFailure { mode: usize, residual: f64, target: f64 },

    #[error("eigenvalues {k} and {} are not separated (gap {gap:.3e} <= {threshold:.3e})", .k + 1)]
    NearDegenerate { k: usize, gap: f64, threshold: f64 },

    #[error("split position {a} is within {tol:e} of the crossing {crossing} ({left} / {right})")]
    DegenerateSplit { a: f64, crossing: f64, tol: f64, left: ModeLabel, right: ModeLabel },

    #[error("tracked-mode closure needs {needed} modes, above the cap of {cap}")]
    ClosureCap { needed: usize, cap: usize },

    #[error("tridiagonal solve broke down at row {row}")]
    LinearSolveFailure { row: usize },

    #[error("state norm {norm:.3e} is too small to normalize")]
    ZeroNorm { norm: f64 },

    #[error("wave functions live on different grids ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },

    #[error("tracked crossing at a = {crossing} lies inside the horizontal motion {from} -> {to}")]
    CrossingInside { from: f64, to: f64, crossing: f64 },

    #[error("crossing over 2*delta = {} in tau = {tau} exceeds the speed bound kappa = {kappa}", 2.0 * .delta)]
    SpeedInfeasible { delta: f64, tau: f64, kappa: f64 },

    #[error("stage junction {index} is discontinuous: {parameter} jumps by {jump:.3e}")]
    Discontinuity { index: usize, parameter: String, jump: f64 },

    #[error("no admissible interval lengths: {0}")]
    InfeasibleLengths(String),

    #[error("stage '{stage}' reached fidelity {best:.4} after {attempts} duration doublings (target {target:.4})")]
    StageNotAdiabatic { stage: String, best: f64, target: f64, attempts: usize },

    #[error("crossing duration does not bracket amplitude {target:.4}: tau {tau_fast:.4e} -> {amp_fast:.4}, tau {tau_slow:.4e} -> {amp_slow:.4}")]
    BisectionFailure { target: f64, tau_fast: f64, amp_fast: f64, tau_slow: f64, amp_slow: f64 },

    #[error("eigenvalues {j} and {k} are near the rational resonance {p}/{q}")]
    RationalResonance { j: usize, k: usize, p: u32, q: u32 },

    #[error("phase targets not reached within the maximum wait {max_wait}")]
    WaitExceeded { max_wait: f64 },

    #[error("initial and final norms differ: {initial} vs {target}")]
    NormMismatch { initial: f64, target: f64 },

    #[error("orbit left the computable mode range (cap {cap}) after {} cycles", .partial.len().saturating_sub(1))]
    ClosureExceeded { cap: u64, partial: Vec<u64> },
}

impl Error {
    /// Whether the error comes from the inputs rather than from a numerical
    /// procedure that failed to reach its target.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::UnderResolved { .. }
                | Error::DegenerateSplit { .. }
                | Error::ClosureCap { .. }
                | Error::GridMismatch { .. }
                | Error::CrossingInside { .. }
                | Error::SpeedInfeasible { .. }
                | Error::Discontinuity { .. }
                | Error::InfeasibleLengths(_)
                | Error::NormMismatch { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
