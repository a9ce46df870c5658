use serde::{Deserialize, Serialize};

use super::{
    check_epsilon, check_kappa, eigenbasis, fixed_stage, half_widths, rank_probes, stage_tolerance,
    tracked_energy, tune_stage, Settings, StageRecord,
};
use crate::control::{
    concat, crossing_stage, horizontal_stage, vertical_stage, ControlPath, CrossingStage, Stage,
};
use crate::error::{invalid, Result};
use crate::field::WallState;
use crate::spectral::{
    crossings_along, label_at_rank, quasi_adiabatic_permutation, rank_of, ModeLabel, Permutation,
};

/// Everything decided while building a single-wall permutation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub a_i: f64,
    pub a_f: f64,
    /// Number of tracked modes `N`.
    pub tracked: usize,
    /// Largest rank visited by a tracked mode.
    pub closure: usize,
    /// Crossing stages in the order the wall passes them.
    pub crossings: Vec<CrossingStage>,
    pub sigma: Permutation,
    pub epsilon: f64,
    /// Error allowance of each adiabatic stage, `epsilon / (4J + 3)`.
    pub stage_tolerance: f64,
    pub kappa: f64,
    pub eta_star: f64,
    pub i_star: f64,
    pub stages: Vec<StageRecord>,
    pub total_duration: f64,
}

impl PermutationPlan {
    /// Number of crossing stages `J`.
    pub fn crossing_count(&self) -> usize {
        self.crossings.len()
    }

    /// Sum of the measured per-stage errors.
    pub fn measured_error_sum(&self) -> f64 {
        self.stages.iter().map(|s| s.error).sum()
    }
}

/// Builds the single-wall path that carries `sin(k pi x)` to
/// `sin(sigma(k) pi x)` (up to a phase) for every `k <= n`: raise the wall at
/// `a_i`, move it to `a_f` slowly between crossings and quickly through them,
/// then lower it.
///
/// Adiabatic stages start at the fastest duration allowed by `kappa` and are
/// doubled until each tracked eigenvector is carried to its target within
/// `epsilon / (4J + 3)`. Crossing stages use the shortest admissible time.
pub fn build_theorem1_path(
    a_i: f64,
    a_f: f64,
    n: usize,
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
) -> Result<(ControlPath, PermutationPlan)> {
    check_epsilon(epsilon)?;
    check_kappa(kappa)?;
    settings.validate()?;
    if !(a_i > 0.0 && a_i < 1.0 && a_f > 0.0 && a_f < 1.0) {
        return Err(invalid(format!("wall positions must lie in (0, 1), got {a_i} and {a_f}")));
    }
    let sigma = quasi_adiabatic_permutation(a_i, a_f, n)?;
    let m = sigma.closure();
    let labels: Vec<ModeLabel> =
        (1..=n as u64).map(|k| label_at_rank(k, a_i)).collect::<Result<_>>()?;

    // Several label pairs may cross at the same point; one stage passes them all.
    let mut positions: Vec<f64> = Vec::new();
    for c in crossings_along(a_i, a_f, n)? {
        if positions.last() != Some(&c.position) {
            positions.push(c.position);
        }
    }
    let mut points = vec![a_i];
    points.extend(&positions);
    points.push(a_f);
    let deltas = half_widths(&points);
    let direction: i8 = if a_f >= a_i { 1 } else { -1 };
    let crossings: Vec<CrossingStage> = positions
        .iter()
        .zip(&deltas)
        .map(|(&position, &delta)| CrossingStage {
            position,
            delta,
            tau: CrossingStage::min_tau(delta, kappa),
            direction,
        })
        .collect();
    let tol = stage_tolerance(epsilon, crossings.len());

    let ranks_at = |a: f64| -> Result<Vec<usize>> {
        labels.iter().map(|&l| rank_of(l, a).map(|r| r as usize)).collect()
    };
    let energy = |a: f64, b: f64| tracked_energy(&[&[a], &[b]], m);
    let basis = |a: f64, height: f64| eigenbasis(&[WallState::new(height, settings.eta, a)?], m, &settings.grid);
    let identity_pairs = |ranks: &[usize]| ranks.iter().map(|&r| (r, r)).collect::<Vec<_>>();

    let mut stages: Vec<Stage> = Vec::new();
    let mut records = Vec::new();
    let mut walls = vec![WallState::new(0.0, settings.eta, a_i)?];

    // raise the wall
    let up = vertical_stage(&walls, 0, settings.height, kappa)?.with_tracked_energy(energy(a_i, a_i));
    let ranks = ranks_at(a_i)?;
    let probes = rank_probes(&basis(a_i, 0.0)?, &basis(a_i, settings.height)?, &identity_pairs(&ranks));
    let (up, rec, _) = tune_stage(up, &probes, tol, settings)?;
    walls = up.end_walls();
    stages.push(up);
    records.push(rec);

    let mut here = a_i;
    for c in &crossings {
        // adiabatic approach; horizontal_stage's own crossing guard is skipped
        // because the plan already located every tracked crossing exactly
        let to = c.from_position();
        if to != here {
            let stage =
                horizontal_stage(&walls, 0, to, kappa, 0)?.with_tracked_energy(energy(here, to));
            let ranks = ranks_at(here)?;
            let probes = rank_probes(
                &basis(here, settings.height)?,
                &basis(to, settings.height)?,
                &identity_pairs(&ranks),
            );
            let (stage, rec, _) = tune_stage(stage, &probes, tol, settings)?;
            walls = stage.end_walls();
            stages.push(stage);
            records.push(rec);
        }
        // fast passage, measured but not tuned
        let stage = crossing_stage(&walls, 0, c, kappa)?.with_tracked_energy(energy(to, c.to_position()));
        let pairs: Vec<(usize, usize)> =
            ranks_at(to)?.into_iter().zip(ranks_at(c.to_position())?).collect();
        let probes =
            rank_probes(&basis(to, settings.height)?, &basis(c.to_position(), settings.height)?, &pairs);
        records.push(fixed_stage(&stage, &probes, settings)?);
        walls = stage.end_walls();
        stages.push(stage);
        here = c.to_position();
    }
    if here != a_f {
        let stage = horizontal_stage(&walls, 0, a_f, kappa, 0)?.with_tracked_energy(energy(here, a_f));
        let ranks = ranks_at(here)?;
        let probes =
            rank_probes(&basis(here, settings.height)?, &basis(a_f, settings.height)?, &identity_pairs(&ranks));
        let (stage, rec, _) = tune_stage(stage, &probes, tol, settings)?;
        walls = stage.end_walls();
        stages.push(stage);
        records.push(rec);
    }

    // lower the wall
    let down = vertical_stage(&walls, 0, 0.0, kappa)?.with_tracked_energy(energy(a_f, a_f));
    let ranks = ranks_at(a_f)?;
    let probes = rank_probes(&basis(a_f, settings.height)?, &basis(a_f, 0.0)?, &identity_pairs(&ranks));
    let (down, rec, _) = tune_stage(down, &probes, tol, settings)?;
    stages.push(down);
    records.push(rec);

    let path = concat(stages)?;
    let plan = PermutationPlan {
        a_i,
        a_f,
        tracked: n,
        closure: m,
        crossings,
        sigma,
        epsilon,
        stage_tolerance: tol,
        kappa,
        eta_star: settings.eta,
        i_star: settings.height,
        stages: records,
        total_duration: path.duration(),
    };
    Ok((path, plan))
}
