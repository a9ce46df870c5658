use std::f64::consts::PI;

use quasiwall_core::propagate::{propagate_observed, TrajectoryRecorder};
use quasiwall_core::protocols::{
    build_arbitrary_permutation_path, build_theorem1_path, build_theorem3_path, growth_exact, simulate_growth,
    GrowthIndex, GrowthModel, GrowthOrbit, GrowthStats, PermutationPlan, PermutationReport, Settings,
    StageRecord, SuperpositionReport, Theorem3Report,
};
use quasiwall_core::spectral::{crossing_permutation, ideal_values, write_spectrum_csv, Side, SpectrumRow};
use quasiwall_core::{
    assemble, lowest_eigenpairs, propagate, quasi_adiabatic_permutation, Complex64, ControlPath,
    DiscreteHamiltonian, Error, PotentialField, SpatialGrid, WaveFunction,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{CommandKind, ExperimentConfig};
use crate::output::OutputDir;
use crate::CliError;

/// Coarsest grid with `h <= 1/(8 eta)`.
fn auto_grid(eta: f64) -> usize {
    ((8.0 * eta).ceil() as usize).saturating_sub(1).max(SpatialGrid::MIN_POINTS)
}

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut config = config.clone();
    config.grid_points.get_or_insert(auto_grid(config.eta_star));
    let out = OutputDir::create(config.output_dir())?;
    log::info!("running {:?} into {}", config.command, config.output_dir().display());
    match config.command {
        CommandKind::Spectrum => spectrum(&config, &out),
        CommandKind::Theorem1 => theorem1(&config, &out),
        CommandKind::Permutation => permutation(&config, &out),
        CommandKind::Theorem3 => theorem3(&config, &out),
        CommandKind::Growth => growth(&config, &out),
        CommandKind::Selftest => selftest(&config, &out),
    }
}

fn grid(config: &ExperimentConfig) -> Result<SpatialGrid, CliError> {
    Ok(SpatialGrid::new(config.grid_points.expect("grid resolved"))?)
}

fn settings(config: &ExperimentConfig) -> Result<Settings, CliError> {
    Ok(Settings::new(grid(config)?, config.eta_star, config.i_star)?.with_dt(config.dt_target))
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "L",
        Side::Right => "R",
    }
}

/// Propagates `psi` and, when asked, dumps its trajectory against the
/// lowest `modes` sine modes.
fn evolve(
    psi: &WaveFunction,
    path: &ControlPath,
    config: &ExperimentConfig,
    out: &OutputDir,
    label: &str,
    modes: usize,
) -> Result<WaveFunction, CliError> {
    let Some(every) = config.trajectory_every else {
        return Ok(propagate(psi, path, config.dt_target)?);
    };
    let basis = lowest_eigenpairs(&DiscreteHamiltonian::free(*psi.grid()), modes)?;
    let mut recorder = TrajectoryRecorder::new(path, Some(&basis), every);
    let end = propagate_observed(psi, path, config.dt_target, &mut |_, t, u| recorder.observe(t, u))?;
    if let Some(e) = recorder.error() {
        return Err(e.clone().into());
    }
    let (file, f) = out.file(&format!("trajectory_{label}.csv"))?;
    recorder.write_csv(f).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    Ok(end)
}

#[derive(Serialize)]
struct OverlapRow {
    start: usize,
    target: u64,
    mode: usize,
    re: f64,
    im: f64,
    magnitude: f64,
}

fn overlap_rows(start: usize, target: u64, psi: &WaveFunction, modes: usize) -> Result<Vec<OverlapRow>, CliError> {
    (1..=modes)
        .map(|j| {
            let c = WaveFunction::sine_mode(*psi.grid(), j).inner(psi)?;
            Ok(OverlapRow { start, target, mode: j, re: c.re, im: c.im, magnitude: c.norm() })
        })
        .collect()
}

#[derive(Serialize)]
struct StageRow {
    part: &'static str,
    index: usize,
    kind: quasiwall_core::StageKind,
    duration: f64,
    doublings: usize,
    error: f64,
    tuned: bool,
}

fn stage_rows(part: &'static str, stages: &[StageRecord]) -> Vec<StageRow> {
    stages
        .iter()
        .enumerate()
        .map(|(index, s)| StageRow {
            part,
            index,
            kind: s.kind,
            duration: s.duration,
            doublings: s.doublings,
            error: s.error,
            tuned: s.tuned,
        })
        .collect()
}

#[derive(Serialize)]
struct GapRecord {
    k: usize,
    min_gap: f64,
    at: f64,
}

#[derive(Serialize)]
struct SpectrumResults {
    positions: Vec<f64>,
    /// Smallest distance between consecutive discrete levels over the sampled positions.
    min_gaps: Vec<GapRecord>,
}

#[derive(Serialize)]
struct IdealRow {
    a: f64,
    k: usize,
    mu: f64,
    side: &'static str,
    index: u64,
}

fn spectrum(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = &config.spectrum;
    if p.samples < 2 || p.modes == 0 || !(0.0 < p.a_min && p.a_min < p.a_max && p.a_max < 1.0) {
        return Err(CliError::Config("spectrum needs 0 < a_min < a_max < 1, samples >= 2 and modes >= 1".into()));
    }
    let grid = grid(config)?;
    let positions: Vec<f64> =
        (0..p.samples).map(|i| p.a_min + (p.a_max - p.a_min) * i as f64 / (p.samples - 1) as f64).collect();
    let mut rows = Vec::new();
    let mut ideal = Vec::new();
    let mut min_gaps: Vec<GapRecord> =
        (1..p.modes).map(|k| GapRecord { k, min_gap: f64::INFINITY, at: f64::NAN }).collect();
    for &a in &positions {
        let field = PotentialField::single(config.i_star, config.eta_star, a)?;
        // values only: near an avoided crossing the levels may be too close
        // for the eigenvector solver, and the gap is what is being measured
        let values = assemble(&field, &grid)?.as_tridiagonal().lowest_eigenvalues(p.modes);
        let labels = ideal_values(a, p.modes);
        for (k, (&lambda, mode)) in values.iter().zip(&labels).enumerate() {
            rows.push(SpectrumRow { a, k: k + 1, lambda, label: mode.label });
            ideal.push(IdealRow {
                a,
                k: k + 1,
                mu: mode.value,
                side: side_name(mode.label.side),
                index: mode.label.index,
            });
        }
        for (g, w) in min_gaps.iter_mut().zip(values.windows(2)) {
            if w[1] - w[0] < g.min_gap {
                g.min_gap = w[1] - w[0];
                g.at = a;
            }
        }
    }
    let (file, f) = out.file("spectrum.csv")?;
    write_spectrum_csv(f, &rows).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    out.write_csv("ideal.csv", &ideal)?;
    for g in &min_gaps {
        log::info!("min gap between levels {} and {}: {:.3e} at a = {}", g.k, g.k + 1, g.min_gap, g.at);
    }
    out.write_manifest(config, SpectrumResults { positions, min_gaps }, None)
}

#[derive(Serialize)]
struct TransferResult {
    start: usize,
    target: u64,
    /// Phase-aligned L2 distance to the target mode.
    error: f64,
    overlap: f64,
}

#[derive(Serialize)]
struct Theorem1Results<'a> {
    plan: &'a PermutationPlan,
    transfers: Vec<TransferResult>,
    max_error: f64,
}

fn transfers(
    path: &ControlPath,
    images: &[u64],
    modes: usize,
    config: &ExperimentConfig,
    out: &OutputDir,
) -> Result<(Vec<TransferResult>, Vec<OverlapRow>), CliError> {
    let grid = grid(config)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for (i, &target) in images.iter().enumerate() {
        let k = i + 1;
        let end = evolve(&WaveFunction::sine_mode(grid, k), path, config, out, &format!("k{k}"), modes)?;
        let goal = WaveFunction::sine_mode(grid, target as usize);
        results.push(TransferResult {
            start: k,
            target,
            error: end.phase_aligned_distance(&goal)?,
            overlap: goal.inner(&end)?.norm(),
        });
        rows.extend(overlap_rows(k, target, &end, modes)?);
    }
    Ok((results, rows))
}

fn theorem1(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let p = &config.theorem1;
    let s = settings(config)?;
    let (path, plan) = build_theorem1_path(p.a_i, p.a_f, p.modes, config.epsilon, config.kappa, &s)?;
    log::info!("path of {} stages, duration {:.3}", path.stages().len(), path.duration());
    let (results, rows) = transfers(&path, plan.sigma.images(), plan.closure.max(p.modes), config, out)?;
    let max_error = results.iter().map(|r| r.error).fold(0.0, f64::max);
    out.write_csv("overlaps.csv", &rows)?;
    out.write_csv("stages.csv", &stage_rows("path", &plan.stages))?;
    out.write_manifest(config, Theorem1Results { plan: &plan, transfers: results, max_error }, Some(&path))?;
    check_error(max_error, config.epsilon)
}

#[derive(Serialize)]
struct PermutationResults<'a> {
    report: &'a PermutationReport,
    transfers: Vec<TransferResult>,
    /// Largest deviation of an overlap magnitude from the permutation matrix.
    max_entry_deviation: f64,
}

fn permutation(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sigma = &config.permutation.sigma;
    let s = settings(config)?;
    let (path, report) = build_arbitrary_permutation_path(sigma, config.epsilon, config.kappa, &s)?;
    log::info!("{} walls, duration {:.3}", report.closure - 1, path.duration());
    let (results, rows) = transfers(&path, sigma, sigma.len(), config, out)?;
    let max_entry_deviation = rows
        .iter()
        .map(|r| (r.magnitude - if r.mode as u64 == r.target { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    out.write_csv("overlaps.csv", &rows)?;
    out.write_csv("stages.csv", &stage_rows("path", &report.stages))?;
    out.write_manifest(config, PermutationResults { report: &report, transfers: results, max_entry_deviation }, Some(&path))?;
    check_error(max_entry_deviation, config.epsilon)
}

fn check_error(error: f64, epsilon: f64) -> Result<(), CliError> {
    if error <= epsilon {
        log::info!("error {error:.4e} within epsilon {epsilon}");
        Ok(())
    } else {
        Err(CliError::Numeric(format!("error {error:.4e} exceeds epsilon {epsilon}")))
    }
}

fn state_from(grid: SpatialGrid, coefficients: &[[f64; 2]], what: &str) -> Result<WaveFunction, CliError> {
    if coefficients.is_empty() {
        return Err(CliError::Config(format!("{what} needs at least one coefficient")));
    }
    let mut psi = WaveFunction::zeros(grid);
    for (k, &[re, im]) in coefficients.iter().enumerate() {
        psi.add_scaled(Complex64::new(re, im), &WaveFunction::sine_mode(grid, k + 1))?;
    }
    psi.normalized().map_err(|_| CliError::Config(format!("{what} coefficients are all zero")))
}

#[derive(Serialize)]
struct ResponseRow {
    part: &'static str,
    crossing: usize,
    tau: f64,
    amplitude: f64,
}

#[derive(Serialize)]
struct StateRow {
    mode: usize,
    target_re: f64,
    target_im: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct Theorem3Results<'a> {
    report: &'a Theorem3Report,
    /// L2 distance of the propagated state from the target.
    error: f64,
}

fn response_rows(part: &'static str, report: &SuperpositionReport) -> Vec<ResponseRow> {
    report
        .crossings
        .iter()
        .enumerate()
        .flat_map(|(j, c)| {
            c.response.iter().map(move |r| ResponseRow { part, crossing: j + 1, tau: r.tau, amplitude: r.amplitude })
        })
        .collect()
}

fn theorem3(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let s = settings(config)?;
    let u_i = state_from(s.grid, &config.theorem3.initial, "initial")?;
    let u_f = state_from(s.grid, &config.theorem3.target, "target")?;
    let (path, report) = build_theorem3_path(&u_i, &u_f, config.epsilon, config.kappa, &s)?;
    log::info!("{} modes, duration {:.3}", report.modes, path.duration());
    let modes = report.modes.max(config.theorem3.initial.len()).max(config.theorem3.target.len()) + 2;
    let end = evolve(&u_i, &path, config, out, "state", modes)?;
    let error = end.distance(&u_f)?;

    let mut stages = Vec::new();
    let mut response = Vec::new();
    if let Some(r) = &report.reverse {
        stages.extend(stage_rows("reverse", &r.stages));
        response.extend(response_rows("reverse", r));
    }
    stages.extend(stage_rows("forward", &report.forward.stages));
    response.extend(response_rows("forward", &report.forward));
    let state = (1..=modes)
        .map(|j| {
            let phi = WaveFunction::sine_mode(s.grid, j);
            let (want, got) = (phi.inner(&u_f)?, phi.inner(&end)?);
            Ok(StateRow { mode: j, target_re: want.re, target_im: want.im, re: got.re, im: got.im })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    out.write_csv("overlaps.csv", &state)?;
    out.write_csv("stages.csv", &stages)?;
    out.write_csv("response.csv", &response)?;
    out.write_manifest(config, Theorem3Results { report: &report, error }, Some(&path))?;
    check_error(error, config.epsilon)
}

#[derive(Serialize)]
struct OrbitRow {
    cycle: usize,
    k: u64,
    lambda: f64,
}

#[derive(Serialize)]
struct SimulationRow {
    step: usize,
    ln_k: f64,
    /// The index itself while it is small enough to hold exactly.
    k: Option<u64>,
}

#[derive(Serialize)]
struct GrowthResults {
    stats: GrowthStats,
    z_score: f64,
    orbit: GrowthOrbit,
    mean_log_increment: f64,
    /// Whether the exact orbit left the computable range before finishing.
    truncated: bool,
}

fn growth(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let g = &config.growth;
    let model = GrowthModel::new(g.beta, g.gamma, g.k0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(g.steps + 1);
    let stats = simulate_growth(&model, g.steps, &mut rng, Some(&mut trace))?;
    log::info!("mean log increment {:.4} (expected {:.4}, z = {:.2})", stats.mean, stats.expected, stats.z_score());

    let (orbit, truncated) = match growth_exact(g.a_i, g.a_f, g.k0, g.cycles) {
        Ok(o) => (o, false),
        Err(Error::ClosureExceeded { partial, .. }) => {
            log::warn!("exact orbit left the computable range after {} cycles", partial.len() - 1);
            let log_increments = partial.windows(2).map(|w| (w[1] as f64 / w[0] as f64).ln()).collect();
            let orbit = GrowthOrbit {
                a_i: g.a_i,
                a_f: g.a_f,
                indices: partial,
                log_increments,
                kind: quasiwall_core::protocols::OrbitKind::Open,
            };
            (orbit, true)
        }
        Err(e) => return Err(e.into()),
    };
    let rows: Vec<OrbitRow> = orbit
        .indices
        .iter()
        .enumerate()
        .map(|(cycle, &k)| OrbitRow { cycle, k, lambda: (k as f64 * PI).powi(2) })
        .collect();
    let sim: Vec<SimulationRow> = trace
        .iter()
        .enumerate()
        .map(|(step, idx)| SimulationRow {
            step,
            ln_k: idx.ln(),
            k: match idx {
                GrowthIndex::Exact(k) => Some(*k),
                GrowthIndex::Log(_) => None,
            },
        })
        .collect();
    out.write_csv("growth.csv", &rows)?;
    out.write_csv("simulation.csv", &sim)?;
    let results = GrowthResults {
        z_score: stats.z_score(),
        stats,
        mean_log_increment: orbit.mean_log_increment(),
        orbit,
        truncated,
    };
    out.write_manifest(config, results, None)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Checks that finish in seconds and catch a broken build: free spectrum,
/// unitarity, the two permutation formulas, growth statistics and a small
/// end-to-end permutation path.
fn selftest(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let mut checks = Vec::new();
    let grid = SpatialGrid::new(255)?;

    let free = lowest_eigenpairs(&DiscreteHamiltonian::free(grid), 4)?;
    let worst = free
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &l)| (l / ((k + 1) as f64 * PI).powi(2) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check { name: "free_spectrum", pass: worst < 1e-3, detail: format!("relative error {worst:.2e}") });

    let field = PotentialField::single(4e3, 25.0, 0.4)?;
    let mut psi = WaveFunction::sine_mode(grid, 1);
    psi.add_scaled(Complex64::new(0.0, 1.0), &WaveFunction::sine_mode(grid, 3))?;
    let before = psi.norm();
    for _ in 0..200 {
        psi = quasiwall_core::propagate::step(&psi, &field, 1e-3)?;
    }
    let drift = (psi.norm() / before - 1.0).abs();
    checks.push(Check { name: "unitarity", pass: drift < 1e-10, detail: format!("norm drift {drift:.2e}") });

    let mut mismatches = 0;
    for (a_i, a_f) in [(0.43, 0.57), (0.21, 0.77), (0.66, 0.31), (0.52, 0.48)] {
        if quasi_adiabatic_permutation(a_i, a_f, 8)? != crossing_permutation(a_i, a_f, 8)? {
            mismatches += 1;
        }
    }
    checks.push(Check { name: "permutation_formulas", pass: mismatches == 0, detail: format!("{mismatches} mismatches") });

    let model = GrowthModel::new(0.7, 0.3, 100)?;
    let stats = simulate_growth(&model, 10_000, &mut ChaCha8Rng::seed_from_u64(config.seed), None)?;
    checks.push(Check {
        name: "growth_rate",
        pass: stats.z_score().abs() < 4.0,
        detail: format!("mean {:.4} expected {:.4} z {:.2}", stats.mean, stats.expected, stats.z_score()),
    });

    let weak = Settings::new(grid, 25.0, 30.0)?;
    let (path, plan) = build_theorem1_path(0.43, 0.57, 2, 0.5, 20.0, &weak)?;
    let mut overlap: f64 = 1.0;
    for k in 1..=2 {
        let end = propagate(&WaveFunction::sine_mode(grid, k), &path, weak.dt_target)?;
        let goal = WaveFunction::sine_mode(grid, plan.sigma.apply(k) as usize);
        overlap = overlap.min(goal.inner(&end)?.norm());
    }
    checks.push(Check { name: "weak_swap", pass: overlap >= 0.5, detail: format!("smallest overlap {overlap:.4}") });

    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    out.write_csv("selftest.csv", &checks)?;
    out.write_manifest(config, &checks, None)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("self-checks failed: {}", failed.join(", "))))
    }
}
