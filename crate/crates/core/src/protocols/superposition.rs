use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::phases::tune_phases_masked;
use super::{
    check_epsilon, check_kappa, eigenbasis, half_widths, interval_lengths, rank_probes,
    stage_tolerance, tracked_energy, tune_stage, walls_at, PhaseTuning, Settings, StageRecord,
    DEFAULT_MAX_WAIT, DEFAULT_PHASE_TOL,
};
use crate::control::{concat, ControlPath, CrossingStage, Stage, StageKind, THETA_PRIME_MAX};
use crate::error::{invalid, Error, Result};
use crate::propagate::{propagate, propagate_stages, WaveFunction, STEP_PHASE};
use crate::spectral::{assemble, SpectralDecomposition};
use crate::field::PotentialField;

/// Largest number of modes a superposition may address.
pub const MAX_MODES: usize = 8;

/// Bisection budget and tolerance on `|c_k|` for the crossing speed.
const BISECTION_STEPS: usize = 12;
const AMPLITUDE_TOL: f64 = 0.02;

/// The slow end of the bracket is searched by growing `tau` by this factor.
const SLOW_GROWTH: f64 = 4.0;
const SLOW_ATTEMPTS: usize = 10;

/// Squared split amplitude the slow end of the bracket must reach.
const SLOW_FLOOR: f64 = 0.9;

/// Samples of the recorded speed-to-amplitude response.
const RESPONSE_SAMPLES: usize = 8;

/// `u = sum_k c_k alpha_k sqrt(2) sin(k pi x)` with real `c_k >= 0`,
/// `sum c_k^2 = 1` and unit phases `alpha_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionTarget {
    coefficients: Vec<f64>,
    phases: Vec<Complex64>,
}

impl SuperpositionTarget {
    pub fn new(coefficients: Vec<f64>, phases: Vec<Complex64>) -> Result<Self> {
        let n = coefficients.len();
        if n == 0 || n > MAX_MODES || phases.len() != n {
            return Err(invalid(format!(
                "need 1..={MAX_MODES} coefficients with one phase each, got {n} and {}",
                phases.len()
            )));
        }
        if coefficients.iter().any(|c| !(*c >= 0.0)) {
            return Err(invalid("coefficients must be non-negative"));
        }
        let mass: f64 = coefficients.iter().map(|c| c * c).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("squared coefficients sum to {mass}, not 1")));
        }
        if phases.iter().any(|a| (a.norm() - 1.0).abs() > 1e-12) {
            return Err(invalid("phases must have modulus 1"));
        }
        Ok(Self { coefficients, phases })
    }

    /// Real target with all phases equal to one.
    pub fn real(coefficients: Vec<f64>) -> Result<Self> {
        let n = coefficients.len();
        Self::new(coefficients, vec![Complex64::new(1.0, 0.0); n])
    }

    /// The sine expansion of `u` truncated to the fewest modes whose tail
    /// carries at most `(epsilon / 4)^2` of the squared norm, renormalized.
    pub fn from_state(u: &WaveFunction, epsilon: f64) -> Result<Self> {
        let n = modes_needed(u, epsilon)?;
        let b = sine_coefficients(u, n);
        let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm { norm });
        }
        let coefficients: Vec<f64> = b.iter().map(|z| z.norm() / norm).collect();
        let phases = b
            .iter()
            .map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
            .collect();
        let mut t = Self { coefficients, phases };
        t.renormalize();
        Ok(t)
    }

    fn renormalize(&mut self) {
        let s = self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.coefficients.iter_mut().for_each(|c| *c /= s);
    }

    /// The same target over `n >= len()` modes, padded with zero coefficients.
    pub fn padded(&self, n: usize) -> Result<Self> {
        if n < self.len() || n > MAX_MODES {
            return Err(invalid(format!("cannot pad {} modes to {n}", self.len())));
        }
        let mut t = self.clone();
        t.coefficients.resize(n, 0.0);
        t.phases.resize(n, Complex64::new(1.0, 0.0));
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn phases(&self) -> &[Complex64] {
        &self.phases
    }

    /// `c_k alpha_k` for the 1-based mode `k`.
    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.phases[k - 1] * self.coefficients[k - 1]
    }

    /// The target as a wave function of norm `scale`.
    pub fn state(&self, grid: crate::field::SpatialGrid, scale: f64) -> WaveFunction {
        let mut psi = WaveFunction::zeros(grid);
        for k in 1..=self.len() {
            psi.add_scaled(self.amplitude(k) * scale, &WaveFunction::sine_mode(grid, k)).unwrap();
        }
        psi
    }
}

/// `<sqrt(2) sin(k pi x), u>` for `k = 1..=n`.
fn sine_coefficients(u: &WaveFunction, n: usize) -> Vec<Complex64> {
    (1..=n).map(|k| WaveFunction::sine_mode(*u.grid(), k).inner(u).unwrap()).collect()
}

/// Smallest `N` whose sine tail holds at most `(epsilon/4)^2` of `|u|^2`.
fn modes_needed(u: &WaveFunction, epsilon: f64) -> Result<usize> {
    let total = u.norm().powi(2);
    if total < 1e-28 {
        return Err(Error::ZeroNorm { norm: total.sqrt() });
    }
    let allowed = (0.25 * epsilon).powi(2) * total;
    let mut kept = 0.0;
    for (k, b) in sine_coefficients(u, MAX_MODES).iter().enumerate() {
        kept += b.norm_sqr();
        if total - kept <= allowed {
            return Ok(k + 1);
        }
    }
    Err(invalid(format!("more than {MAX_MODES} sine modes are needed to represent the state within {epsilon}")))
}

/// One point of the crossing-time to split-amplitude response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub tau: f64,
    /// Fraction of the incoming amplitude that follows the adiabatic branch.
    pub amplitude: f64,
}

/// How the passage time of one crossing was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingTuning {
    /// Length of the first interval at the crossing.
    pub position: f64,
    pub delta: f64,
    /// Split amplitude aimed at, relative to the incoming amplitude.
    pub target: f64,
    pub tau: f64,
    pub achieved: f64,
    pub iterations: usize,
    pub fast: ResponsePoint,
    pub slow: ResponsePoint,
    pub response: Vec<ResponsePoint>,
}

/// Record of a superposition path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionReport {
    pub target: SuperpositionTarget,
    pub initial_lengths: Vec<f64>,
    pub final_first_length: f64,
    pub crossings: Vec<CrossingTuning>,
    pub phase: PhaseTuning,
    /// Phase picked up by each eigenmode while the walls are lowered.
    pub extinction_phases: Vec<f64>,
    pub stages: Vec<StageRecord>,
    /// Coefficients of the final state on the sine modes `1..=N`.
    pub final_coefficients: Vec<Complex64>,
    /// Distance of the final state from the scaled target.
    pub error: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub eta_star: f64,
    pub i_star: f64,
    pub total_duration: f64,
}

/// Wall geometry of the superposition protocol: the first interval shrinks
/// while the others keep their proportions, so every wall position is an
/// affine function of the first length.
struct Geometry {
    shares: Vec<f64>,
}

impl Geometry {
    fn new(lengths: &[f64]) -> Self {
        let rest = 1.0 - lengths[0];
        let mut shares = Vec::with_capacity(lengths.len() - 1);
        let mut acc = 0.0;
        shares.push(0.0);
        for l in &lengths[1..lengths.len() - 1] {
            acc += l / rest;
            shares.push(acc);
        }
        Self { shares }
    }

    fn positions(&self, first: f64) -> Vec<f64> {
        self.shares.iter().map(|s| s + first * (1.0 - s)).collect()
    }
}

/// Builds the path that spreads `sqrt(2) sin(pi x)` over the target modes.
pub fn build_superposition_path(
    target: &SuperpositionTarget,
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
) -> Result<(ControlPath, SuperpositionReport)> {
    let initial = WaveFunction::sine_mode(settings.grid, 1);
    let (path, report, _) = superpose_from(&initial, target, epsilon, kappa, settings)?;
    Ok((path, report))
}

/// Builds a superposition path measured on the actual state `initial`
/// (assumed close to a multiple of `sin(pi x)`), returning the path, its
/// record and the final state. The result approximates
/// `|initial| sum_k c_k alpha_k sqrt(2) sin(k pi x)`.
///
/// With `N` target modes the unit interval is split into `N` pieces of
/// decreasing length. The first (longest) piece shrinks past the others;
/// at its `j`-th crossing the passage time is bisected so that the fraction
/// of the remaining amplitude that tunnels into piece `j + 1` equals
/// `c_j / sqrt(1 - sum_{i<j} c_i^2)`. A timed wait then aligns the phases
/// before the walls are lowered.
pub fn superpose_from(
    initial: &WaveFunction,
    target: &SuperpositionTarget,
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
) -> Result<(ControlPath, SuperpositionReport, WaveFunction)> {
    check_epsilon(epsilon)?;
    check_kappa(kappa)?;
    settings.validate()?;
    if initial.grid() != &settings.grid {
        return Err(Error::GridMismatch { left: initial.grid().len(), right: settings.grid.len() });
    }
    let n = target.len();
    let scale = initial.norm();
    if scale < 1e-14 {
        return Err(Error::ZeroNorm { norm: scale });
    }
    let phase_tol = DEFAULT_PHASE_TOL.min(0.25 * epsilon);
    let (eta, height, grid) = (settings.eta, settings.height, settings.grid);

    if n == 1 {
        return single_mode(initial, target, epsilon, kappa, settings, phase_tol);
    }

    let lengths = interval_lengths(n, eta)?;
    let geo = Geometry::new(&lengths);
    let rest0 = 1.0 - lengths[0];
    // first-length values where piece 1 meets piece j + 1
    let meets: Vec<f64> = lengths[1..].iter().map(|l| l / (rest0 + l)).collect();
    let lowest = lengths[1] / (2.0 * rest0 + lengths[1]);
    let last = *meets.last().unwrap();
    let mirrored = last - (lengths[0] - meets[0]);
    let final_first = if mirrored > 1.05 * lowest { mirrored } else { 0.5 * (last + lowest) };
    let mut points = vec![lengths[0]];
    points.extend(&meets);
    points.push(final_first);
    let deltas = half_widths(&points);
    let tol = stage_tolerance(epsilon, n - 1);

    let energy = |a: f64, b: f64| tracked_energy(&[&geo.positions(a), &geo.positions(b)], n);
    let basis = |first: f64, h: f64| eigenbasis(&walls_at(&geo.positions(first), h, eta), n, &grid);
    let all_ranks: Vec<(usize, usize)> = (1..=n).map(|k| (k, k)).collect();
    let segment = |kind: StageKind, a: f64, b: f64, duration: f64| -> Result<Stage> {
        Ok(Stage::between(
            kind,
            &walls_at(&geo.positions(a), height, eta),
            &walls_at(&geo.positions(b), height, eta),
            duration,
        )?
        .with_tracked_energy(energy(a, b)))
    };

    let mut stages = Vec::new();
    let mut records = Vec::new();
    let mut psi = initial.clone();
    let advance = |psi: &mut WaveFunction, stage: &Stage| -> Result<()> {
        *psi = propagate_stages(psi, std::slice::from_ref(stage), settings.dt_target)?;
        Ok(())
    };

    // raise the walls
    let p0 = geo.positions(lengths[0]);
    let rise = Stage::between(
        StageKind::Vertical,
        &walls_at(&p0, 0.0, eta),
        &walls_at(&p0, height, eta),
        THETA_PRIME_MAX * height / kappa,
    )?
    .with_tracked_energy(energy(lengths[0], lengths[0]));
    let probes = rank_probes(&basis(lengths[0], 0.0)?, &basis(lengths[0], height)?, &all_ranks);
    let (rise, rec, _) = tune_stage(rise, &probes, tol, settings)?;
    advance(&mut psi, &rise)?;
    stages.push(rise);
    records.push(rec);

    let mut here = lengths[0];
    let mut remaining = 1.0f64;
    let mut tunings = Vec::new();
    for (j, (&meet, &delta)) in meets.iter().zip(&deltas).enumerate() {
        let from = meet + delta;
        if from != here {
            let stage = segment(StageKind::Horizontal, here, from, THETA_PRIME_MAX * (here - from).abs() / kappa)?;
            let probes = rank_probes(&basis(here, height)?, &basis(from, height)?, &all_ranks);
            let (stage, rec, _) = tune_stage(stage, &probes, tol, settings)?;
            advance(&mut psi, &stage)?;
            stages.push(stage);
            records.push(rec);
        }
        let to = meet - delta;
        let c = target.coefficients()[j];
        let aim = if remaining > 1e-12 { (c / remaining.sqrt()).min(1.0) } else { 0.0 };
        let ratio_tol = if remaining > 1e-12 { AMPLITUDE_TOL / remaining.sqrt() } else { 1.0 };
        let before = basis(from, height)?;
        let after = basis(to, height)?;
        let tuning =
            tune_crossing(&psi, j + 1, meet, delta, aim, ratio_tol, kappa, &before, &after, &segment, settings)?;
        let stage = segment(StageKind::Crossing, from, to, tuning.tau)?;
        advance(&mut psi, &stage)?;
        records.push(StageRecord {
            kind: StageKind::Crossing,
            duration: tuning.tau,
            doublings: 0,
            error: (tuning.achieved - tuning.target).abs() * remaining.sqrt(),
            tuned: true,
        });
        stages.push(stage);
        remaining = (remaining - c * c).max(0.0);
        tunings.push(tuning);
        here = to;
    }
    if here != final_first {
        let stage =
            segment(StageKind::Horizontal, here, final_first, THETA_PRIME_MAX * (here - final_first).abs() / kappa)?;
        let probes = rank_probes(&basis(here, height)?, &basis(final_first, height)?, &all_ranks);
        let (stage, rec, _) = tune_stage(stage, &probes, tol, settings)?;
        advance(&mut psi, &stage)?;
        stages.push(stage);
        records.push(rec);
    }

    // lowering the walls; its probes also give the phase each mode picks up
    let pf = geo.positions(final_first);
    let fall = Stage::between(
        StageKind::Vertical,
        &walls_at(&pf, height, eta),
        &walls_at(&pf, 0.0, eta),
        THETA_PRIME_MAX * height / kappa,
    )?
    .with_tracked_energy(energy(final_first, final_first));
    let probes = rank_probes(&basis(final_first, height)?, &basis(final_first, 0.0)?, &all_ranks);
    let (fall, fall_rec, outputs) = tune_stage(fall, &probes, tol, settings)?;
    let extinction: Vec<f64> = outputs
        .iter()
        .enumerate()
        .map(|(k, out)| WaveFunction::sine_mode(grid, k + 1).inner(out).map(|z| z.arg()))
        .collect::<Result<_>>()?;

    // wait at full height until the phases line up
    let wait_energy = energy(final_first, final_first);
    let dt = settings.dt_target.min(STEP_PHASE / wait_energy);
    let field = PotentialField::new(walls_at(&pf, height, eta))?;
    let ham = assemble(&field, &grid)?;
    let goals: Vec<Complex64> =
        (0..n).map(|k| target.phases()[k] * Complex64::from_polar(1.0, -extinction[k])).collect();
    let mask: Vec<bool> = target.coefficients().iter().map(|&c| c > 1e-9).collect();
    let phase = tune_phases_masked(&psi, &ham, &goals, &mask, DEFAULT_MAX_WAIT, phase_tol, Some(dt))?;
    let steps = phase.steps.unwrap_or(0);
    let wait = crate::control::wait_stage(&walls_at(&pf, height, eta), steps as f64 * dt)?
        .with_tracked_energy(wait_energy);
    advance(&mut psi, &wait)?;
    records.push(StageRecord {
        kind: StageKind::Wait,
        duration: wait.duration(),
        doublings: 0,
        error: phase.residual,
        tuned: false,
    });
    stages.push(wait);
    advance(&mut psi, &fall)?;
    stages.push(fall);
    records.push(fall_rec);

    let path = concat(stages)?;
    let want = target.state(grid, scale);
    let error = psi.distance(&want)?;
    let report = SuperpositionReport {
        target: target.clone(),
        initial_lengths: lengths,
        final_first_length: final_first,
        crossings: tunings,
        phase,
        extinction_phases: extinction,
        stages: records,
        final_coefficients: sine_coefficients(&psi, n),
        error,
        epsilon,
        kappa,
        eta_star: eta,
        i_star: height,
        total_duration: path.duration(),
    };
    Ok((path, report, psi))
}

/// One target mode: no walls are needed, only a wait that sets the phase.
fn single_mode(
    initial: &WaveFunction,
    target: &SuperpositionTarget,
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
    phase_tol: f64,
) -> Result<(ControlPath, SuperpositionReport, WaveFunction)> {
    let grid = settings.grid;
    let walls = walls_at(&[0.5], 0.0, settings.eta);
    let energy = tracked_energy(&[&[0.5]], 1);
    let dt = settings.dt_target.min(STEP_PHASE / energy);
    let ham = crate::spectral::DiscreteHamiltonian::free(grid);
    let phase =
        tune_phases_masked(initial, &ham, target.phases(), &[true], DEFAULT_MAX_WAIT, phase_tol, Some(dt))?;
    let wait = crate::control::wait_stage(&walls, phase.steps.unwrap_or(0) as f64 * dt)?.with_tracked_energy(energy);
    let psi = propagate_stages(initial, std::slice::from_ref(&wait), settings.dt_target)?;
    let record =
        StageRecord { kind: StageKind::Wait, duration: wait.duration(), doublings: 0, error: phase.residual, tuned: false };
    let path = concat(vec![wait])?;
    let error = psi.distance(&target.state(grid, initial.norm()))?;
    let report = SuperpositionReport {
        target: target.clone(),
        initial_lengths: vec![1.0],
        final_first_length: 1.0,
        crossings: Vec::new(),
        phase,
        extinction_phases: vec![0.0],
        stages: vec![record],
        final_coefficients: sine_coefficients(&psi, 1),
        error,
        epsilon,
        kappa,
        eta_star: settings.eta,
        i_star: settings.height,
        total_duration: path.duration(),
    };
    Ok((path, report, psi))
}

/// Picks the passage time of crossing `rank` (1-based rank of the shrinking
/// piece before the crossing) so that the measured split amplitude is `aim`.
#[allow(clippy::too_many_arguments)]
fn tune_crossing(
    psi: &WaveFunction,
    rank: usize,
    position: f64,
    delta: f64,
    aim: f64,
    tol: f64,
    kappa: f64,
    before: &SpectralDecomposition,
    after: &SpectralDecomposition,
    segment: &dyn Fn(StageKind, f64, f64, f64) -> Result<Stage>,
    settings: &Settings,
) -> Result<CrossingTuning> {
    let incoming = psi.project(&before.eigenvectors()[rank - 1]).norm();
    let tau_fast = CrossingStage::min_tau(delta, kappa);
    let (from, to) = (position + delta, position - delta);
    let measure = |tau: f64| -> Result<ResponsePoint> {
        let stage = segment(StageKind::Crossing, from, to, tau)?;
        let out = propagate_stages(psi, std::slice::from_ref(&stage), settings.dt_target)?;
        let split = out.project(&after.eigenvectors()[rank - 1]).norm();
        Ok(ResponsePoint { tau, amplitude: if incoming > 0.0 { split / incoming } else { 0.0 } })
    };
    let done = |point: ResponsePoint, iterations: usize, fast, slow, response| CrossingTuning {
        position,
        delta,
        target: aim,
        tau: point.tau,
        achieved: point.amplitude,
        iterations,
        fast,
        slow,
        response,
    };

    let fast = measure(tau_fast)?;
    if incoming < 1e-9 || (fast.amplitude - aim).abs() <= tol {
        return Ok(done(fast, 0, fast, fast, vec![fast]));
    }
    let mut slow = fast;
    let mut tau = tau_fast;
    let mut bracketed = false;
    for _ in 0..SLOW_ATTEMPTS {
        tau *= SLOW_GROWTH;
        slow = measure(tau)?;
        if (slow.amplitude >= aim && slow.amplitude.powi(2) >= SLOW_FLOOR) || (slow.amplitude - aim).abs() <= tol
        {
            bracketed = true;
            break;
        }
    }
    if !bracketed || fast.amplitude > aim {
        return Err(Error::BisectionFailure {
            target: aim,
            tau_fast: fast.tau,
            amp_fast: fast.amplitude,
            tau_slow: slow.tau,
            amp_slow: slow.amplitude,
        });
    }

    // response curve over the bracket, log-spaced
    let ratio = slow.tau / fast.tau;
    let mut response = vec![fast];
    for i in 1..RESPONSE_SAMPLES - 1 {
        let t = fast.tau * ratio.powf(i as f64 / (RESPONSE_SAMPLES - 1) as f64);
        response.push(measure(t)?);
    }
    response.push(slow);

    if (slow.amplitude - aim).abs() <= tol {
        return Ok(done(slow, 0, fast, slow, response));
    }
    let (mut lo, mut hi) = (fast, slow);
    let mut best = if (fast.amplitude - aim).abs() < (slow.amplitude - aim).abs() { fast } else { slow };
    for iteration in 1..=BISECTION_STEPS {
        let mid = measure((lo.tau * hi.tau).sqrt())?;
        if (mid.amplitude - aim).abs() < (best.amplitude - aim).abs() {
            best = mid;
        }
        if (mid.amplitude - aim).abs() <= tol {
            return Ok(done(mid, iteration, fast, slow, response));
        }
        if mid.amplitude < aim {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(done(best, BISECTION_STEPS, fast, slow, response))
}

/// Record of a two-part path between arbitrary states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    /// Number of modes `N` kept for both states.
    pub modes: usize,
    /// The superposition path whose time reversal empties `u_i` into the
    /// fundamental, when `u_i` is not already there.
    pub reverse: Option<SuperpositionReport>,
    pub forward: SuperpositionReport,
    pub norm: f64,
    /// Distance of the builder's final state from `u_f`.
    pub error: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

/// Builds a path steering `u_i` to `u_f` (equal norms). The first part is
/// the time reversal of a superposition path that would produce the
/// conjugate of `u_i` from the fundamental, so it carries `u_i` to a
/// multiple of `sin(pi x)`; the second part spreads that over the modes of
/// `u_f`. Both parts keep the fewest modes whose sine tail is at most
/// `(epsilon/4)^2` of the mass.
pub fn build_theorem3_path(
    u_i: &WaveFunction,
    u_f: &WaveFunction,
    epsilon: f64,
    kappa: f64,
    settings: &Settings,
) -> Result<(ControlPath, Theorem3Report)> {
    check_epsilon(epsilon)?;
    let (ni, nf) = (u_i.norm(), u_f.norm());
    if (ni - nf).abs() > 1e-10 * ni.max(1.0) {
        return Err(Error::NormMismatch { initial: ni, target: nf });
    }
    if u_i.grid() != &settings.grid || u_f.grid() != &settings.grid {
        return Err(Error::GridMismatch { left: u_i.grid().len(), right: settings.grid.len() });
    }
    let source = SuperpositionTarget::from_state(&u_i.conj(), epsilon)?;
    let goal = SuperpositionTarget::from_state(u_f, epsilon)?;
    let n = source.len().max(goal.len());

    let (reverse, reverse_report, start) = if source.len() > 1 {
        let mut fundamental = WaveFunction::sine_mode(settings.grid, 1);
        fundamental.scale(ni);
        let (path, report, _) = superpose_from(&fundamental, &source.padded(n)?, epsilon, kappa, settings)?;
        let back = path.reversed();
        let state = propagate(u_i, &back, settings.dt_target)?;
        (Some(back), Some(report), state)
    } else {
        (None, None, u_i.clone())
    };
    let (forward, forward_report, fin) = superpose_from(&start, &goal.padded(n)?, epsilon, kappa, settings)?;
    let path = match &reverse {
        Some(back) => back.then(&forward)?,
        None => forward,
    };
    let error = fin.distance(u_f)?;
    let report = Theorem3Report {
        modes: n,
        reverse: reverse_report,
        forward: forward_report,
        norm: ni,
        error,
        epsilon,
        kappa,
    };
    Ok((path, report))
}
