//! End-to-end constructions: eigenmode permutations with one or several
//! walls, amplitude distribution with phase tuning, and the index growth
//! model of repeated permutation cycles.

mod growth;
mod permutation;
mod phases;
mod superposition;
mod theorem1;

pub use growth::{
    expected_log_increment, growth_exact, growth_step, simulate_growth, GrowthIndex, GrowthModel,
    GrowthOrbit, GrowthStats, OrbitKind, ORBIT_CAP,
};
pub use permutation::{build_arbitrary_permutation_path, interval_lengths, PermutationReport};
pub use phases::{first_alignment, tune_phases, tune_phases_stepped, PhaseTuning, DEFAULT_MAX_WAIT, DEFAULT_PHASE_TOL};
pub use superposition::{
    build_superposition_path, build_theorem3_path, superpose_from, CrossingTuning, ResponsePoint,
    SuperpositionReport, SuperpositionTarget, Theorem3Report,
};
pub use theorem1::{build_theorem1_path, PermutationPlan};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::control::{Stage, StageKind};
use crate::error::{invalid, Error, Result};
use crate::field::{PotentialField, SpatialGrid, WallState};
use crate::propagate::{propagate_stages, WaveFunction};
use crate::spectral::{assemble, lowest_eigenpairs, SpectralDecomposition};

/// Grid, wall shape and numerical knobs shared by every protocol builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub grid: SpatialGrid,
    /// Wall sharpness `eta_*`, frozen during every path.
    pub eta: f64,
    /// Full wall height `I_*`.
    pub height: f64,
    /// Upper bound on the propagation time step.
    pub dt_target: f64,
    /// How many times an adiabatic stage may have its duration doubled.
    pub max_doublings: usize,
}

impl Settings {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_DOUBLINGS: usize = 24;

    pub fn new(grid: SpatialGrid, eta: f64, height: f64) -> Result<Self> {
        let s = Self {
            grid,
            eta,
            height,
            dt_target: Self::DEFAULT_DT,
            max_doublings: Self::DEFAULT_DOUBLINGS,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_dt(mut self, dt_target: f64) -> Self {
        self.dt_target = dt_target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("wall sharpness must be positive, got {}", self.eta)));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(invalid(format!("wall height must be positive, got {}", self.height)));
        }
        if !(self.dt_target > 0.0 && self.dt_target.is_finite()) {
            return Err(invalid(format!("dt_target must be positive, got {}", self.dt_target)));
        }
        self.grid.check_resolves(self.eta)
    }
}

/// What happened to one stage while a path was synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub kind: StageKind,
    pub duration: f64,
    /// Number of duration doublings applied by the adiabatic tuner.
    pub doublings: usize,
    /// Largest phase-aligned L2 error over the stage's probe states. For an
    /// amplitude-splitting crossing, the deviation of the split amplitude
    /// from its target instead.
    pub error: f64,
    /// Whether the duration was tuned (adiabatic stages) or fixed (crossings, waits).
    pub tuned: bool,
}

/// A probe state and the state it should become at the end of a stage.
#[derive(Debug, Clone)]
pub struct Probe {
    pub start: WaveFunction,
    pub target: WaveFunction,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("target error must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("rate bound must be positive, got {kappa}")));
    }
    Ok(())
}

/// Lowest `m` eigenpairs of the discrete Hamiltonian of `walls`.
pub fn eigenbasis(walls: &[WallState], m: usize, grid: &SpatialGrid) -> Result<SpectralDecomposition> {
    let field = PotentialField::new(walls.to_vec())?;
    lowest_eigenpairs(&assemble(&field, grid)?, m)
}

/// The `m` lowest values `p^2 pi^2 / L^2` over intervals of the given lengths.
pub fn split_values(lengths: &[f64], m: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(m * lengths.len());
    for &l in lengths {
        for p in 1..=m {
            out.push((p as f64 * PI / l).powi(2));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.truncate(m);
    out
}

/// Interval lengths cut out of `(0, 1)` by walls at sorted `positions`.
pub(crate) fn lengths_of(positions: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(positions.len() + 1);
    for &a in positions {
        out.push(a - prev);
        prev = a;
    }
    out.push(1.0 - prev);
    out
}

/// Energy whose phase must be resolved when the lowest `m` modes of the
/// split at any of `configurations` are populated.
pub fn tracked_energy(configurations: &[&[f64]], m: usize) -> f64 {
    let free = (m as f64 * PI).powi(2);
    configurations
        .iter()
        .map(|pos| split_values(&lengths_of(pos), m).last().copied().unwrap_or(0.0))
        .fold(free, f64::max)
}

/// Probe states after `stage` and the largest phase-aligned error among them.
pub fn stage_error(
    stage: &Stage,
    probes: &[Probe],
    settings: &Settings,
) -> Result<(f64, Vec<WaveFunction>)> {
    // probes are independent; collecting in order keeps the result deterministic
    let results: Vec<(f64, WaveFunction)> = probes
        .par_iter()
        .map(|p| {
            let out = propagate_stages(&p.start, std::slice::from_ref(stage), settings.dt_target)?;
            Ok((out.phase_aligned_distance(&p.target)?, out))
        })
        .collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let outputs = results.into_iter().map(|r| r.1).collect();
    Ok((worst, outputs))
}

/// Doubles the duration of `stage` until every probe ends within
/// `tolerance` (phase-aligned L2) of its target. Also returns the probe
/// states at the end of the accepted stage.
pub fn tune_stage(
    stage: Stage,
    probes: &[Probe],
    tolerance: f64,
    settings: &Settings,
) -> Result<(Stage, StageRecord, Vec<WaveFunction>)> {
    if stage.is_empty() || probes.is_empty() {
        let (error, outputs) = if stage.is_empty() {
            (0.0, probes.iter().map(|p| p.start.clone()).collect())
        } else {
            stage_error(&stage, probes, settings)?
        };
        let record =
            StageRecord { kind: stage.kind(), duration: stage.duration(), doublings: 0, error, tuned: false };
        return Ok((stage, record, outputs));
    }
    let mut current = stage;
    let mut best = f64::INFINITY;
    for doublings in 0..=settings.max_doublings {
        let (error, outputs) = stage_error(&current, probes, settings)?;
        best = best.min(error);
        if error <= tolerance {
            let record = StageRecord {
                kind: current.kind(),
                duration: current.duration(),
                doublings,
                error,
                tuned: true,
            };
            return Ok((current, record, outputs));
        }
        if doublings < settings.max_doublings {
            current = current.stretched(2.0 * current.duration())?;
        }
    }
    let to_fidelity = |e: f64| 1.0 - 0.5 * e * e;
    Err(Error::StageNotAdiabatic {
        stage: format!("{:?}", current.kind()).to_lowercase(),
        best: to_fidelity(best),
        target: to_fidelity(tolerance),
        attempts: settings.max_doublings,
    })
}

/// Records a stage whose duration is not tuned.
pub fn fixed_stage(stage: &Stage, probes: &[Probe], settings: &Settings) -> Result<StageRecord> {
    let error = if stage.is_empty() { 0.0 } else { stage_error(stage, probes, settings)?.0 };
    Ok(StageRecord { kind: stage.kind(), duration: stage.duration(), doublings: 0, error, tuned: false })
}

/// Probes mapping eigenvector `from - 1` of `start` to eigenvector `to - 1`
/// of `end` for every 1-based rank pair.
pub fn rank_probes(
    start: &SpectralDecomposition,
    end: &SpectralDecomposition,
    pairs: &[(usize, usize)],
) -> Vec<Probe> {
    pairs.iter().map(|&(a, b)| Probe { start: start.mode(a - 1), target: end.mode(b - 1) }).collect()
}

/// Walls of the given positions, all at `height` and sharpness `eta`.
pub fn walls_at(positions: &[f64], height: f64, eta: f64) -> Vec<WallState> {
    positions.iter().map(|&a| WallState { height, sharpness: eta, position: a }).collect()
}

/// `delta_j`: half of 99% of the distance from each crossing to its nearest
/// neighbour among the crossings and the two endpoints. `points` lists the
/// start, the crossings in passing order, then the end.
pub(crate) fn half_widths(points: &[f64]) -> Vec<f64> {
    (1..points.len() - 1)
        .map(|j| {
            let gap = (points[j] - points[j - 1]).abs().min((points[j + 1] - points[j]).abs());
            0.5 * 0.99 * gap
        })
        .collect()
}

/// Per-stage error allowance when `crossings` crossings are passed.
pub fn stage_tolerance(epsilon: f64, crossings: usize) -> f64 {
    epsilon / (4.0 * crossings as f64 + 3.0)
}
