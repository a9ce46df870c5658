use serde::{Deserialize, Serialize};

use super::{
    check_epsilon, check_kappa, eigenbasis, rank_probes, stage_tolerance, tracked_energy, tune_stage,
    walls_at, Settings, StageRecord,
};
use crate::control::{concat, motion_stage, ControlPath, Stage, StageKind, THETA_PRIME_MAX};
use crate::error::{invalid, Error, Result};

/// Ratio between the longest and shortest initial interval.
const LENGTH_SPREAD: f64 = 1.6;

/// Record of an arbitrary-permutation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    /// `sigma(1..=N)` as requested.
    pub sigma: Vec<u64>,
    /// The permutation of `1..=M` actually realized.
    pub extended: Vec<u64>,
    pub tracked: usize,
    pub closure: usize,
    pub initial_lengths: Vec<f64>,
    pub final_lengths: Vec<f64>,
    pub epsilon: f64,
    pub stage_tolerance: f64,
    pub kappa: f64,
    pub eta_star: f64,
    pub i_star: f64,
    pub stages: Vec<StageRecord>,
    pub total_duration: f64,
}

/// `m` strictly decreasing lengths summing to one, in geometric progression
/// with a longest/shortest ratio below two, so that every interval's
/// fundamental lies below every second harmonic.
pub fn interval_lengths(m: usize, eta: f64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InfeasibleLengths(format!("need at least two intervals, got {m}")));
    }
    let q = LENGTH_SPREAD.powf(1.0 / (m - 1) as f64);
    let raw: Vec<f64> = (0..m).map(|j| q.powi(-(j as i32))).collect();
    let total: f64 = raw.iter().sum();
    let lengths: Vec<f64> = raw.iter().map(|l| l / total).collect();
    let (max, min) = (lengths[0], lengths[m - 1]);
    if !(max / min < 2.0) || lengths.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InfeasibleLengths(format!("{m} lengths cannot be strictly ordered within ratio 2")));
    }
    // each interval must leave room beside a wall of width 2/eta
    if min <= 4.0 / eta {
        return Err(Error::InfeasibleLengths(format!(
            "shortest interval {min:.4} is not wider than two wall widths at eta = {eta}"
        )));
    }
    Ok(lengths)
}

/// Extends `sigma` on `1..=N` to a permutation of `1..=M`,
/// `M = max(N, sigma(1..=N))`, sending `N + 1, ...` to the unused ranks in
/// increasing order.
fn extend(sigma: &[u64]) -> Result<Vec<u64>> {
    let n = sigma.len();
    if n == 0 {
        return Err(invalid("need at least one tracked mode"));
    }
    let mut seen = sigma.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n || seen[0] == 0 {
        return Err(invalid("sigma must send 1..=N to distinct positive ranks"));
    }
    let m = (*seen.last().unwrap() as usize).max(n);
    let mut full = sigma.to_vec();
    full.extend((1..=m as u64).filter(|k| !sigma.contains(k)));
    Ok(full)
}

fn positions_of(lengths: &[f64]) -> Vec<f64> {
    lengths[..lengths.len() - 1]
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l;
            Some(*acc)
        })
        .collect()
}

/// Builds a path with `J = M - 1` walls realizing any finite permutation:
/// interval `j` starts with the `j`-th longest length and ends with the
/// `sigma(j)`-th longest, so its fundamental moves from rank `j` to rank
/// `sigma(j)`. With walls high enough that tunneling between intervals is
/// negligible, all walls move in one stage.
///
/// A single tracked mode with `sigma = [1]` still uses two intervals.
pub fn build_arbitrary_permutation_path(
    sigma: &[u64],
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
) -> Result<(ControlPath, PermutationReport)> {
    check_epsilon(epsilon)?;
    check_kappa(kappa)?;
    settings.validate()?;
    let mut extended = extend(sigma)?;
    if extended.len() == 1 {
        extended.push(2);
    }
    let m = extended.len();
    let n = sigma.len();
    let initial = interval_lengths(m, settings.eta)?;
    let fin: Vec<f64> = extended.iter().map(|&r| initial[r as usize - 1]).collect();
    let (p0, p1) = (positions_of(&initial), positions_of(&fin));
    let tol = stage_tolerance(epsilon, m - 1);
    let energy = tracked_energy(&[&p0, &p1], m);
    let (eta, height) = (settings.eta, settings.height);
    let grid = settings.grid;

    let free = eigenbasis(&walls_at(&p0, 0.0, eta), m, &grid)?;
    let raised = eigenbasis(&walls_at(&p0, height, eta), m, &grid)?;
    let moved = eigenbasis(&walls_at(&p1, height, eta), m, &grid)?;
    let free_end = eigenbasis(&walls_at(&p1, 0.0, eta), m, &grid)?;
    let image = |k: usize| extended[k - 1] as usize;

    let mut records = Vec::new();
    let rise = Stage::between(
        StageKind::Vertical,
        &walls_at(&p0, 0.0, eta),
        &walls_at(&p0, height, eta),
        THETA_PRIME_MAX * height / kappa,
    )?
    .with_tracked_energy(energy);
    let pairs: Vec<(usize, usize)> = (1..=n).map(|k| (k, k)).collect();
    let (rise, rec, _) = tune_stage(rise, &rank_probes(&free, &raised, &pairs), tol, settings)?;
    records.push(rec);

    let motion = motion_stage(&rise.end_walls(), &p1, kappa)?.with_tracked_energy(energy);
    let pairs: Vec<(usize, usize)> = (1..=n).map(|k| (k, image(k))).collect();
    let (motion, rec, _) = tune_stage(motion, &rank_probes(&raised, &moved, &pairs), tol, settings)?;
    records.push(rec);

    let fall = Stage::between(
        StageKind::Vertical,
        &motion.end_walls(),
        &walls_at(&p1, 0.0, eta),
        THETA_PRIME_MAX * height / kappa,
    )?
    .with_tracked_energy(energy);
    let pairs: Vec<(usize, usize)> = (1..=n).map(|k| (image(k), image(k))).collect();
    let (fall, rec, _) = tune_stage(fall, &rank_probes(&moved, &free_end, &pairs), tol, settings)?;
    records.push(rec);

    let path = concat(vec![rise, motion, fall])?;
    let report = PermutationReport {
        sigma: sigma.to_vec(),
        extended,
        tracked: n,
        closure: m,
        initial_lengths: initial,
        final_lengths: fin,
        epsilon,
        stage_tolerance: tol,
        kappa,
        eta_star: eta,
        i_star: height,
        stages: records,
        total_duration: path.duration(),
    };
    Ok((path, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_are_ordered_and_spread_below_two() {
        for m in 2..=40 {
            let l = interval_lengths(m, 1e4).unwrap();
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(l.windows(2).all(|w| w[0] > w[1]));
            assert!(l[0] / l[m - 1] < 2.0);
        }
        assert!(matches!(interval_lengths(40, 100.0), Err(Error::InfeasibleLengths(_))));
    }

    #[test]
    fn extension_fills_unused_ranks_in_order() {
        assert_eq!(extend(&[2, 3, 1]).unwrap(), vec![2, 3, 1]);
        assert_eq!(extend(&[5, 1]).unwrap(), vec![5, 1, 2, 3, 4]);
        assert_eq!(extend(&[1, 2]).unwrap(), vec![1, 2]);
        assert!(extend(&[2, 2]).is_err());
        assert!(extend(&[0, 1]).is_err());
    }

    #[test]
    fn final_length_ranks_follow_sigma() {
        // the interval that ends j-th longest holds the fundamental of rank j
        let full = extend(&[4, 1, 3]).unwrap();
        let l = interval_lengths(full.len(), 1e4).unwrap();
        let fin: Vec<f64> = full.iter().map(|&r| l[r as usize - 1]).collect();
        for (j, &target) in full.iter().enumerate() {
            let rank = 1 + fin.iter().filter(|&&x| x > fin[j]).count();
            assert_eq!(rank as u64, target);
        }
        assert!((fin.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
