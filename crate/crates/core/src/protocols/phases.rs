use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::propagate::WaveFunction;
use crate::spectral::{lowest_eigenpairs, DiscreteHamiltonian};

/// Default bound on the phase-tuning wait.
pub const DEFAULT_MAX_WAIT: f64 = 5000.0;

/// Default per-mode phase tolerance in radians.
pub const DEFAULT_PHASE_TOL: f64 = 0.1;

/// Largest numerator and denominator checked for resonances.
const RESONANCE_ORDER: u32 = 16;

/// Modes whose current amplitude is below this carry no usable phase.
const SILENT: f64 = 1e-12;

/// Result of a phase search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTuning {
    pub wait: f64,
    /// Whole number of time steps, when the search ran on a step lattice.
    pub steps: Option<u64>,
    /// Largest remaining phase error over the constrained modes.
    pub residual: f64,
    /// Rotation frequencies used for each mode.
    pub frequencies: Vec<f64>,
}

/// Wraps an angle to `(-pi, pi]`.
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

struct Search {
    phase0: Vec<f64>,
    freq: Vec<f64>,
    goal: Vec<f64>,
}

impl Search {
    fn error_at(&self, t: f64) -> f64 {
        self.phase0
            .iter()
            .zip(&self.freq)
            .zip(&self.goal)
            .map(|((p, w), g)| wrap(p - w * t - g).abs())
            .fold(0.0, f64::max)
    }

    /// Rejects frequency pairs so close to a ratio `p/q` that the
    /// combination `q phi_j - p phi_k` cannot sweep a full turn in `max_wait`.
    fn check_resonance(&self, max_wait: f64) -> Result<()> {
        let n = self.freq.len();
        for j in 0..n {
            for k in j + 1..n {
                for p in 1..=RESONANCE_ORDER {
                    for q in 1..=RESONANCE_ORDER {
                        let drift = (f64::from(q) * self.freq[j] - f64::from(p) * self.freq[k]).abs();
                        if drift * max_wait < TAU {
                            return Err(Error::RationalResonance { j: j + 1, k: k + 1, p, q });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Splits the eigen-coefficients of `state` into phases and the list of
/// modes with a definite phase that `mask` asks to constrain.
fn setup(
    state: &WaveFunction,
    hamiltonian: &DiscreteHamiltonian,
    targets: &[Complex64],
    mask: &[bool],
    max_wait: f64,
    phase_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    if targets.is_empty() {
        return Err(invalid("need at least one phase target"));
    }
    if mask.len() != targets.len() {
        return Err(invalid("mask and targets differ in length"));
    }
    if targets.iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
        return Err(invalid("phase targets must be unit complex numbers"));
    }
    if !(max_wait >= 0.0 && max_wait.is_finite()) || !(phase_tol > 0.0) {
        return Err(invalid("max_wait must be >= 0 and phase_tol > 0"));
    }
    let basis = lowest_eigenpairs(hamiltonian, targets.len())?;
    let coeffs: Vec<Complex64> = basis.eigenvectors().iter().map(|phi| state.project(phi)).collect();
    let scale = state.norm().max(f64::MIN_POSITIVE);
    let active: Vec<usize> =
        (0..coeffs.len()).filter(|&k| mask[k] && coeffs[k].norm() > SILENT * scale).collect();
    let phase0 = coeffs.iter().map(|c| c.arg()).collect();
    Ok((phase0, basis.eigenvalues().to_vec(), active))
}

/// First time in `[0, max_wait]` at which every phase is within `phase_tol`
/// of its goal. Without `dt` the axis is scanned with resolution
/// `2 pi / (20 omega_max)` and promising samples are refined locally; with
/// `dt` only whole multiples of `dt` are tried.
fn scan(search: &Search, max_wait: f64, phase_tol: f64, dt: Option<f64>) -> Result<(f64, f64)> {
    match (search.freq.len(), dt) {
        (0, _) => return Ok((0.0, 0.0)),
        (1, None) => {
            // one rotator: the exact first passage
            let t = if wrap(search.phase0[0] - search.goal[0]).abs() <= phase_tol {
                0.0
            } else {
                (search.phase0[0] - search.goal[0]).rem_euclid(TAU) / search.freq[0]
            };
            if t > max_wait {
                return Err(Error::WaitExceeded { max_wait });
            }
            return Ok((t, search.error_at(t)));
        }
        _ => {}
    }
    if let Some(dt) = dt {
        let max_steps = (max_wait / dt).floor() as u64;
        for n in 0..=max_steps {
            let t = n as f64 * dt;
            let e = search.error_at(t);
            if e <= phase_tol {
                return Ok((t, e));
            }
        }
        return Err(Error::WaitExceeded { max_wait });
    }
    let omega_max = search.freq.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let step = TAU / (20.0 * omega_max);
    let slack = 0.5 * step * omega_max;
    let samples = (max_wait / step).floor() as u64;
    for i in 0..=samples {
        let t = i as f64 * step;
        let e = search.error_at(t);
        if e <= phase_tol {
            return Ok((t, e));
        }
        if e <= phase_tol + slack {
            // refine inside the neighbouring cells
            let mut best = (e, t);
            for j in 1..64 {
                let s = (t - step + 2.0 * step * j as f64 / 64.0).clamp(0.0, max_wait);
                let f = search.error_at(s);
                if f < best.0 {
                    best = (f, s);
                }
            }
            if best.0 <= phase_tol {
                return Ok((best.1, best.0));
            }
        }
    }
    Err(Error::WaitExceeded { max_wait })
}

/// [`scan`], reporting a near-rational frequency pair when one explains
/// why no alignment was found.
fn scan_or_explain(search: &Search, max_wait: f64, phase_tol: f64, dt: Option<f64>) -> Result<(f64, f64)> {
    match scan(search, max_wait, phase_tol, dt) {
        Err(Error::WaitExceeded { .. }) => {
            search.check_resonance(max_wait)?;
            Err(Error::WaitExceeded { max_wait })
        }
        other => other,
    }
}

/// Shared driver: `dt` selects Cayley frequencies and a step lattice.
fn run(
    state: &WaveFunction,
    hamiltonian: &DiscreteHamiltonian,
    targets: &[Complex64],
    mask: &[bool],
    max_wait: f64,
    phase_tol: f64,
    dt: Option<f64>,
) -> Result<PhaseTuning> {
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
    }
    let (phase0, lambda, active) = setup(state, hamiltonian, targets, mask, max_wait, phase_tol)?;
    let freq: Vec<f64> = match dt {
        Some(dt) => lambda.iter().map(|l| 2.0 / dt * (0.5 * dt * l).atan()).collect(),
        None => lambda,
    };
    let search = Search {
        phase0: active.iter().map(|&k| phase0[k]).collect(),
        freq: active.iter().map(|&k| freq[k]).collect(),
        goal: active.iter().map(|&k| targets[k].arg()).collect(),
    };
    let (wait, residual) = scan_or_explain(&search, max_wait, phase_tol, dt).map_err(|e| match e {
        Error::RationalResonance { j, k, p, q } => {
            Error::RationalResonance { j: active[j - 1] + 1, k: active[k - 1] + 1, p, q }
        }
        other => other,
    })?;
    let steps = dt.map(|dt| (wait / dt).round() as u64);
    Ok(PhaseTuning { wait, steps, residual, frequencies: freq })
}

/// Waiting time `t <= max_wait` after which `exp(-i t lambda_k)` times the
/// current phase of eigenmode `k` of `hamiltonian` matches `targets[k]`
/// within `phase_tol` for every mode that `state` populates.
pub fn tune_phases(
    state: &WaveFunction,
    hamiltonian: &DiscreteHamiltonian,
    targets: &[Complex64],
    max_wait: f64,
    phase_tol: f64,
) -> Result<PhaseTuning> {
    run(state, hamiltonian, targets, &vec![true; targets.len()], max_wait, phase_tol, None)
}

/// Like [`tune_phases`], for a wait made of whole Crank-Nicolson steps of
/// length `dt`. Each mode then rotates at the Cayley frequency
/// `(2/dt) atan(dt lambda / 2)`, so the returned wait is exact for the
/// discrete propagator.
pub fn tune_phases_stepped(
    state: &WaveFunction,
    hamiltonian: &DiscreteHamiltonian,
    targets: &[Complex64],
    max_wait: f64,
    phase_tol: f64,
    dt: f64,
) -> Result<PhaseTuning> {
    run(state, hamiltonian, targets, &vec![true; targets.len()], max_wait, phase_tol, Some(dt))
}

/// Phase search that only constrains the modes where `mask` is set.
pub(crate) fn tune_phases_masked(
    state: &WaveFunction,
    hamiltonian: &DiscreteHamiltonian,
    targets: &[Complex64],
    mask: &[bool],
    max_wait: f64,
    phase_tol: f64,
    dt: Option<f64>,
) -> Result<PhaseTuning> {
    run(state, hamiltonian, targets, mask, max_wait, phase_tol, dt)
}

/// First wait within `max_wait` at which rotators of angular frequencies
/// `freq`, starting at phases `phase0`, all sit within `phase_tol` of `goal`.
/// Returns the wait and the residual.
pub fn first_alignment(
    phase0: &[f64],
    freq: &[f64],
    goal: &[f64],
    max_wait: f64,
    phase_tol: f64,
) -> Result<(f64, f64)> {
    if phase0.len() != freq.len() || goal.len() != freq.len() {
        return Err(invalid("phase, frequency and goal lists differ in length"));
    }
    let search = Search { phase0: phase0.to_vec(), freq: freq.to_vec(), goal: goal.to_vec() };
    scan_or_explain(&search, max_wait, phase_tol, None)
}
