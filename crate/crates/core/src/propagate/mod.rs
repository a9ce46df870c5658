//! Crank-Nicolson time stepping of `i u_t = -u_xx + V(t, x)` on a grid.

mod trajectory;

pub use trajectory::TrajectoryRecorder;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{ControlPath, Stage};
use crate::error::{invalid, Error, Result};
use crate::field::{accumulate_walls, PotentialField, SpatialGrid, WallState};
use crate::spectral::SpectralDecomposition;

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-14;

/// Phase accuracy rule: steps never exceed `STEP_PHASE / lambda_track`.
pub const STEP_PHASE: f64 = 0.05;

/// Complex grid function with the h-weighted inner product
/// `<u, v> = h sum conj(u_i) v_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "wave function has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("wave function has non-finite entries"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_real(grid: SpatialGrid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { grid, values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    /// Samples `f` at the interior grid points.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self { grid, values: grid.points().map(f).collect() }
    }

    /// `sqrt(2) sin(k pi x)` sampled on the grid and renormalized.
    pub fn sine_mode(grid: SpatialGrid, k: usize) -> Self {
        let kp = k as f64 * std::f64::consts::PI;
        let mut psi = Self::from_fn(grid, |x| Complex64::new(2f64.sqrt() * (kp * x).sin(), 0.0));
        let n = psi.norm();
        psi.scale(1.0 / n);
        psi
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scale_complex(&mut self, s: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < ZERO_NORM {
            return Err(Error::ZeroNorm { norm: n });
        }
        let mut out = self.clone();
        out.scale(1.0 / n);
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch { left: self.grid.len(), right: other.grid.len() });
        }
        Ok(())
    }

    /// `<self, other> = h sum conj(self_i) other_i`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.spacing())
    }

    /// Inner product with a real grid vector, `h sum phi_i self_i`.
    pub fn project(&self, phi: &[f64]) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(phi).map(|(a, &b)| a * b).sum();
        s * self.grid.spacing()
    }

    /// `self + c other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.check_grid(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// L2 distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.spacing()).sqrt())
    }

    /// `min_alpha ||self - alpha other||` over unit complex `alpha`.
    pub fn phase_aligned_distance(&self, other: &Self) -> Result<f64> {
        let ip = other.inner(self)?;
        let d2 = self.norm().powi(2) + other.norm().powi(2) - 2.0 * ip.norm();
        Ok(d2.max(0.0).sqrt())
    }
}

/// `|<psi, phi>| / (|psi| |phi|)`.
pub fn fidelity(psi: &WaveFunction, phi: &WaveFunction) -> Result<f64> {
    let (a, b) = (psi.norm(), phi.norm());
    if a < ZERO_NORM || b < ZERO_NORM {
        return Err(Error::ZeroNorm { norm: a.min(b) });
    }
    Ok((psi.inner(phi)?.norm() / (a * b)).min(1.0))
}

/// Coefficients `<phi_k, psi>` in the eigenbasis of a decomposition.
pub fn mode_overlaps(psi: &WaveFunction, basis: &SpectralDecomposition) -> Result<Vec<Complex64>> {
    if psi.grid() != basis.grid() {
        return Err(Error::GridMismatch { left: psi.grid().len(), right: basis.grid().len() });
    }
    Ok(basis.eigenvectors().iter().map(|phi| psi.project(phi)).collect())
}

/// Reusable Crank-Nicolson stepper; holds the scratch buffers of the
/// tridiagonal solve.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    grid: SpatialGrid,
    potential: Vec<f64>,
    rhs: Vec<Complex64>,
    sweep: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(grid: SpatialGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            potential: vec![0.0; n],
            rhs: vec![Complex64::new(0.0, 0.0); n],
            sweep: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Advances `psi` by `dt` under the potential of `walls`:
    /// `(1 + i dt/2 H) psi' = (1 - i dt/2 H) psi`.
    pub fn step_walls(&mut self, psi: &mut WaveFunction, walls: &[WallState], dt: f64) -> Result<()> {
        if psi.grid != self.grid {
            return Err(Error::GridMismatch { left: psi.grid.len(), right: self.grid.len() });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        self.potential.iter_mut().for_each(|v| *v = 0.0);
        for wall in walls {
            wall.validate()?;
        }
        accumulate_walls(walls, &self.grid, &mut self.potential)?;
        self.solve(&mut psi.values, dt)
    }

    pub fn step(&mut self, psi: &mut WaveFunction, field: &PotentialField, dt: f64) -> Result<()> {
        self.step_walls(psi, field.walls(), dt)
    }

    fn solve(&mut self, u: &mut [Complex64], dt: f64) -> Result<()> {
        let n = u.len();
        let h = self.grid.spacing();
        let c = 0.5 * dt;
        let base = 2.0 / (h * h);
        let e = -1.0 / (h * h);
        // (1 + i c H) x = (1 - i c H) u, Thomas sweep in real arithmetic with
        // the constant off-diagonal b = i beta
        let beta = c * e;
        let (mut sr, mut si) = (0.0, 0.0);
        let (mut pr, mut pi) = (0.0, 0.0);
        let mut ok = true;
        for i in 0..n {
            let ui = u[i];
            let left = if i > 0 { u[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < n { u[i + 1] } else { Complex64::new(0.0, 0.0) };
            let alpha = c * (base + self.potential[i]);
            // rhs = u - i (alpha u + beta (left + right))
            let hr = alpha * ui.re + beta * (left.re + right.re);
            let hi = alpha * ui.im + beta * (left.im + right.im);
            let (rr, ri) = (ui.re + hi, ui.im - hr);
            let mr = 1.0 + beta * si;
            let mi = alpha - beta * sr;
            let q = 1.0 / (mr * mr + mi * mi);
            ok &= q.is_finite();
            sr = beta * mi * q;
            si = beta * mr * q;
            let tr = rr + beta * pi;
            let ti = ri - beta * pr;
            pr = (tr * mr + ti * mi) * q;
            pi = (ti * mr - tr * mi) * q;
            self.sweep[i] = Complex64::new(sr, si);
            self.rhs[i] = Complex64::new(pr, pi);
        }
        if !ok {
            let row = self.sweep.iter().position(|s| !(s.re.is_finite() && s.im.is_finite()));
            return Err(Error::LinearSolveFailure { row: row.unwrap_or(0) });
        }
        u[n - 1] = self.rhs[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = self.rhs[i] - self.sweep[i] * u[i + 1];
        }
        Ok(())
    }
}

/// Single Crank-Nicolson step with the potential `field_mid`.
pub fn step(psi: &WaveFunction, field_mid: &PotentialField, dt: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    CrankNicolson::new(*psi.grid()).step(&mut out, field_mid, dt)?;
    Ok(out)
}

/// Number of steps and the uniform step used for `stage`:
/// `dt = duration / ceil(duration / min(dt_target, STEP_PHASE / lambda_track))`.
pub fn stage_steps(stage: &Stage, dt_target: f64) -> (usize, f64) {
    let duration = stage.duration();
    if duration <= 0.0 {
        return (0, 0.0);
    }
    let cap = STEP_PHASE / stage.tracked_energy().max(f64::MIN_POSITIVE);
    let dt_max = dt_target.min(cap);
    let steps = ((duration / dt_max) - 1e-9).ceil().max(1.0) as usize;
    (steps, duration / steps as f64)
}

/// Propagates `psi` through one stage in place, calling `observer` with the
/// stage-local time after every step.
pub fn propagate_stage(
    psi: &mut WaveFunction,
    stage: &Stage,
    dt_target: f64,
    stepper: &mut CrankNicolson,
    observer: &mut dyn FnMut(f64, &WaveFunction),
) -> Result<()> {
    let (steps, dt) = stage_steps(stage, dt_target);
    let mut walls = stage.walls_at(0.0);
    for i in 0..steps {
        stage.fill_walls((i as f64 + 0.5) * dt, &mut walls);
        stepper.step_walls(psi, &walls, dt)?;
        observer((i + 1) as f64 * dt, psi);
    }
    Ok(())
}

fn check_dt(dt_target: f64) -> Result<()> {
    if !(dt_target > 0.0 && dt_target.is_finite()) {
        return Err(invalid(format!("dt_target must be positive, got {dt_target}")));
    }
    Ok(())
}

/// Propagates `psi0` along `path`, sampling the field at step midpoints.
pub fn propagate(psi0: &WaveFunction, path: &ControlPath, dt_target: f64) -> Result<WaveFunction> {
    propagate_observed(psi0, path, dt_target, &mut |_, _, _| {})
}

/// Like [`propagate`], calling `observer(stage_index, global_time, psi)`
/// after every step.
pub fn propagate_observed(
    psi0: &WaveFunction,
    path: &ControlPath,
    dt_target: f64,
    observer: &mut dyn FnMut(usize, f64, &WaveFunction),
) -> Result<WaveFunction> {
    check_dt(dt_target)?;
    let mut psi = psi0.clone();
    let mut stepper = CrankNicolson::new(*psi0.grid());
    let mut t0 = 0.0;
    for (index, stage) in path.stages().iter().enumerate() {
        propagate_stage(&mut psi, stage, dt_target, &mut stepper, &mut |t, u| {
            observer(index, t0 + t, u)
        })?;
        t0 += stage.duration();
    }
    Ok(psi)
}

/// Propagates through a list of stages that need not form a validated path.
pub fn propagate_stages(psi0: &WaveFunction, stages: &[Stage], dt_target: f64) -> Result<WaveFunction> {
    check_dt(dt_target)?;
    let mut psi = psi0.clone();
    let mut stepper = CrankNicolson::new(*psi0.grid());
    for stage in stages {
        propagate_stage(&mut psi, stage, dt_target, &mut stepper, &mut |_, _| {})?;
    }
    Ok(psi)
}
