//! Smooth, rate-bounded wall schedules: ramps, stages and whole control paths.

mod ramp;

pub use ramp::{smooth_ramp, theta, theta_prime, SmoothRamp, THETA_PRIME_MAX};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{PotentialField, WallState};
use crate::spectral::crossings_along;

/// Step-size energy used when a builder has no better information: the
/// fourth free Dirichlet eigenvalue.
pub const DEFAULT_TRACKED_ENERGY: f64 = 16.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Relative tolerance for parameter continuity at stage junctions.
pub const JUNCTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Vertical,
    Horizontal,
    Crossing,
    Motion,
    Wait,
    Reposition,
}

/// Ramps of one wall's height, sharpness and position over a stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallRamp {
    pub height: SmoothRamp,
    pub sharpness: SmoothRamp,
    pub position: SmoothRamp,
}

impl WallRamp {
    fn between(from: &WallState, to: &WallState, duration: f64) -> Result<Self> {
        Ok(Self {
            height: SmoothRamp::with_duration(from.height, to.height, duration)?,
            sharpness: SmoothRamp::with_duration(from.sharpness, to.sharpness, duration)?,
            position: SmoothRamp::with_duration(from.position, to.position, duration)?,
        })
    }

    pub fn at(&self, t: f64) -> WallState {
        WallState {
            height: self.height.value(t),
            sharpness: self.sharpness.value(t),
            position: self.position.value(t),
        }
    }

    pub fn start(&self) -> WallState {
        WallState { height: self.height.v0, sharpness: self.sharpness.v0, position: self.position.v0 }
    }

    pub fn end(&self) -> WallState {
        WallState { height: self.height.v1, sharpness: self.sharpness.v1, position: self.position.v1 }
    }

    pub fn max_rate(&self) -> f64 {
        self.height.max_rate().max(self.sharpness.max_rate()).max(self.position.max_rate())
    }

    fn reversed(&self) -> Self {
        Self {
            height: self.height.reversed(),
            sharpness: self.sharpness.reversed(),
            position: self.position.reversed(),
        }
    }

    fn stretched(&self, duration: f64) -> Self {
        Self {
            height: self.height.stretched(duration),
            sharpness: self.sharpness.stretched(duration),
            position: self.position.stretched(duration),
        }
    }
}

/// A time interval over which every wall parameter follows one smooth ramp.
///
/// `tracked_energy` is the largest eigenvalue whose phase must be resolved
/// during the stage; it sets the time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    kind: StageKind,
    duration: f64,
    tracked_energy: f64,
    walls: Vec<WallRamp>,
}

impl Stage {
    /// Ramps every parameter from `from` to `to` over `duration`.
    pub fn between(kind: StageKind, from: &[WallState], to: &[WallState], duration: f64) -> Result<Self> {
        if from.is_empty() || from.len() != to.len() {
            return Err(invalid("stage endpoints must list the same, non-empty set of walls"));
        }
        for w in from.iter().chain(to) {
            w.validate()?;
        }
        let walls =
            from.iter().zip(to).map(|(a, b)| WallRamp::between(a, b, duration)).collect::<Result<_>>()?;
        Ok(Self { kind, duration, tracked_energy: DEFAULT_TRACKED_ENERGY, walls })
    }

    pub fn with_tracked_energy(mut self, energy: f64) -> Self {
        self.tracked_energy = energy;
        self
    }

    pub fn kind(&self) -> StageKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn tracked_energy(&self) -> f64 {
        self.tracked_energy
    }

    pub fn walls(&self) -> &[WallRamp] {
        &self.walls
    }

    pub fn is_empty(&self) -> bool {
        self.duration == 0.0
    }

    pub fn walls_at(&self, t: f64) -> Vec<WallState> {
        self.walls.iter().map(|w| w.at(t)).collect()
    }

    /// Overwrites `out` with the wall states at stage-local time `t`.
    pub fn fill_walls(&self, t: f64, out: &mut Vec<WallState>) {
        out.clear();
        out.extend(self.walls.iter().map(|w| w.at(t)));
    }

    pub fn field_at(&self, t: f64) -> Result<PotentialField> {
        PotentialField::new(self.walls_at(t))
    }

    pub fn start_walls(&self) -> Vec<WallState> {
        self.walls.iter().map(WallRamp::start).collect()
    }

    pub fn end_walls(&self) -> Vec<WallState> {
        self.walls.iter().map(WallRamp::end).collect()
    }

    /// Largest parameter rate over the stage.
    pub fn max_rate(&self) -> f64 {
        self.walls.iter().map(WallRamp::max_rate).fold(0.0, f64::max)
    }

    /// The stage run backwards in time.
    pub fn reversed(&self) -> Self {
        Self { walls: self.walls.iter().map(WallRamp::reversed).collect(), ..self.clone() }
    }

    /// Same endpoints over a new duration (which must stay positive if any
    /// parameter moves).
    pub fn stretched(&self, duration: f64) -> Result<Self> {
        if duration <= 0.0 && self.max_rate() > 0.0 {
            return Err(invalid("a moving stage needs a positive duration"));
        }
        Ok(Self {
            duration,
            walls: self.walls.iter().map(|w| w.stretched(duration)).collect(),
            ..self.clone()
        })
    }
}

fn wall_index(start: &[WallState], wall: usize) -> Result<WallState> {
    start.get(wall).copied().ok_or_else(|| invalid(format!("no wall with index {wall}")))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid(format!("rate bound must be positive, got {kappa}")));
    }
    Ok(())
}

/// Ramps the height of `wall` to `i_to` with the other parameters frozen.
pub fn vertical_stage(start: &[WallState], wall: usize, i_to: f64, kappa: f64) -> Result<Stage> {
    check_kappa(kappa)?;
    let from = wall_index(start, wall)?;
    if !(i_to >= 0.0) {
        return Err(invalid(format!("wall height must be >= 0, got {i_to}")));
    }
    let duration = smooth_ramp(from.height, i_to, kappa)?.duration;
    let mut to = start.to_vec();
    to[wall].height = i_to;
    Stage::between(StageKind::Vertical, start, &to, duration)
}

/// Moves `wall` to `a_to` with height and sharpness frozen. For a single
/// wall, refuses a motion that passes a crossing of one of the lowest
/// `tracked` ideal modes.
pub fn horizontal_stage(
    start: &[WallState],
    wall: usize,
    a_to: f64,
    kappa: f64,
    tracked: usize,
) -> Result<Stage> {
    check_kappa(kappa)?;
    let from = wall_index(start, wall)?;
    if start.len() == 1 && tracked > 0 && from.position != a_to {
        if let Some(c) = crossings_along(from.position, a_to, tracked)?.first() {
            return Err(Error::CrossingInside { from: from.position, to: a_to, crossing: c.position });
        }
    }
    let duration = smooth_ramp(from.position, a_to, kappa)?.duration;
    let mut to = start.to_vec();
    to[wall].position = a_to;
    Stage::between(StageKind::Horizontal, start, &to, duration)
}

/// A short passage of one wall through a crossing at `position`, from
/// `position - direction * delta` to `position + direction * delta` in time
/// `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingStage {
    pub position: f64,
    pub delta: f64,
    pub tau: f64,
    /// `+1` when the wall moves right, `-1` when it moves left.
    pub direction: i8,
}

impl CrossingStage {
    pub fn from_position(&self) -> f64 {
        self.position - f64::from(self.direction) * self.delta
    }

    pub fn to_position(&self) -> f64 {
        self.position + f64::from(self.direction) * self.delta
    }

    /// Shortest passage time compatible with `|a'| <= kappa`.
    pub fn min_tau(delta: f64, kappa: f64) -> f64 {
        THETA_PRIME_MAX * 2.0 * delta / kappa
    }
}

/// Crossing stage of `wall`; the wall must start at `c.from_position()`.
pub fn crossing_stage(start: &[WallState], wall: usize, c: &CrossingStage, kappa: f64) -> Result<Stage> {
    check_kappa(kappa)?;
    let from = wall_index(start, wall)?;
    if c.direction != 1 && c.direction != -1 {
        return Err(invalid("crossing direction must be +1 or -1"));
    }
    if !(c.delta >= 0.0) {
        return Err(invalid(format!("crossing half-width must be >= 0, got {}", c.delta)));
    }
    let jump = (from.position - c.from_position()).abs();
    if jump > JUNCTION_TOL * from.position.abs().max(1.0) {
        return Err(Error::Discontinuity { index: 0, parameter: format!("wall {wall} position"), jump });
    }
    if c.delta == 0.0 {
        return Stage::between(StageKind::Crossing, start, start, 0.0);
    }
    if c.tau < CrossingStage::min_tau(c.delta, kappa) * (1.0 - 1e-12) {
        return Err(Error::SpeedInfeasible { delta: c.delta, tau: c.tau, kappa });
    }
    let mut to = start.to_vec();
    to[wall].position = c.to_position();
    Stage::between(StageKind::Crossing, start, &to, c.tau)
}

/// Moves every wall to `positions` simultaneously, as slowly as the fastest
/// wall requires.
pub fn motion_stage(start: &[WallState], positions: &[f64], kappa: f64) -> Result<Stage> {
    check_kappa(kappa)?;
    if positions.len() != start.len() {
        return Err(invalid("one target position per wall is required"));
    }
    let duration = start
        .iter()
        .zip(positions)
        .map(|(w, &a)| THETA_PRIME_MAX * (a - w.position).abs() / kappa)
        .fold(0.0, f64::max);
    let to: Vec<WallState> =
        start.iter().zip(positions).map(|(w, &a)| WallState { position: a, ..*w }).collect();
    Stage::between(StageKind::Motion, start, &to, duration)
}

/// Holds every parameter fixed for `duration`.
pub fn wait_stage(start: &[WallState], duration: f64) -> Result<Stage> {
    Stage::between(StageKind::Wait, start, start, duration)
}

/// Moves walls of zero height to new positions; the potential stays zero.
pub fn reposition_stage(start: &[WallState], positions: &[f64], kappa: f64) -> Result<Stage> {
    if start.iter().any(|w| w.height != 0.0) {
        return Err(invalid("walls can only be repositioned at zero height"));
    }
    let mut stage = motion_stage(start, positions, kappa)?;
    stage.kind = StageKind::Reposition;
    Ok(stage)
}

/// A sequence of stages with continuous parameters at every junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    kappa: f64,
    total_duration: f64,
    stages: Vec<Stage>,
}

/// Joins stages into a path, checking parameter continuity at junctions.
pub fn concat(stages: Vec<Stage>) -> Result<ControlPath> {
    if stages.is_empty() {
        return Err(invalid("a control path needs at least one stage"));
    }
    for (index, pair) in stages.windows(2).enumerate() {
        let (a, b) = (pair[0].end_walls(), pair[1].start_walls());
        if a.len() != b.len() {
            return Err(Error::Discontinuity {
                index,
                parameter: "wall count".into(),
                jump: (a.len() as f64 - b.len() as f64).abs(),
            });
        }
        for (j, (x, y)) in a.iter().zip(&b).enumerate() {
            for (name, u, v) in [
                ("height", x.height, y.height),
                ("sharpness", x.sharpness, y.sharpness),
                ("position", x.position, y.position),
            ] {
                let jump = (u - v).abs();
                if jump > JUNCTION_TOL * u.abs().max(v.abs()).max(1.0) {
                    return Err(Error::Discontinuity {
                        index,
                        parameter: format!("wall {j} {name}"),
                        jump,
                    });
                }
            }
        }
    }
    let kappa = stages.iter().map(Stage::max_rate).fold(0.0, f64::max);
    let total_duration = stages.iter().map(Stage::duration).sum();
    Ok(ControlPath { kappa, total_duration, stages })
}

impl ControlPath {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Largest parameter rate over the whole path.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn duration(&self) -> f64 {
        self.total_duration
    }

    pub fn start_walls(&self) -> Vec<WallState> {
        self.stages[0].start_walls()
    }

    pub fn end_walls(&self) -> Vec<WallState> {
        self.stages[self.stages.len() - 1].end_walls()
    }

    /// Wall states at global time `t` (clamped to `[0, T]`).
    pub fn walls_at(&self, t: f64) -> Vec<WallState> {
        let mut t0 = 0.0;
        for stage in &self.stages {
            if t <= t0 + stage.duration() {
                return stage.walls_at((t - t0).max(0.0));
            }
            t0 += stage.duration();
        }
        self.end_walls()
    }

    pub fn field_at(&self, t: f64) -> Result<PotentialField> {
        PotentialField::new(self.walls_at(t))
    }

    /// The path run backwards: `reversed.walls_at(t) = walls_at(T - t)`.
    pub fn reversed(&self) -> Self {
        Self { stages: self.stages.iter().rev().map(Stage::reversed).collect(), ..self.clone() }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &ControlPath) -> Result<Self> {
        concat(self.stages.iter().chain(other.stages.iter()).cloned().collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("control paths always serialize")
    }

    /// Parses and re-validates a path written by [`ControlPath::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ControlPath =
            serde_json::from_str(text).map_err(|e| invalid(format!("bad control path JSON: {e}")))?;
        for stage in &raw.stages {
            Stage::between(stage.kind, &stage.start_walls(), &stage.end_walls(), stage.duration)?;
        }
        concat(raw.stages)
    }
}
