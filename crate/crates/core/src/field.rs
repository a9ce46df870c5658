//! Spatial grid, the wall profile and potentials built from moving walls.
//!
//! The domain is the unit interval with homogeneous Dirichlet conditions. Only
//! interior points are stored; the boundary values are implicitly zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Normalization of the cubic bump so that its integral over [-1, 1] is one.
pub const RHO_PEAK: f64 = 35.0 / 32.0;

/// Interior points per wall half-width required for the wall to be resolved:
/// `h <= 1 / (RESOLUTION_FACTOR * eta)`.
pub const RESOLUTION_FACTOR: f64 = 8.0;

/// Uniform grid of `n` interior points `x_i = i h`, `i = 1..=n`, `h = 1/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n: usize,
}

impl SpatialGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(invalid(format!(
                "grid needs at least {} interior points, got {n}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { n })
    }

    /// Smallest grid of the form `2^k - 1` that resolves walls of sharpness `eta`.
    pub fn resolving(eta: f64) -> Self {
        let needed = (RESOLUTION_FACTOR * eta).ceil() as usize;
        let mut n = 31usize;
        while n + 1 < needed {
            n = 2 * n + 1;
        }
        Self { n }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Position of storage index `i` (0-based), i.e. `x = (i + 1) h`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Storage indices whose positions lie strictly inside `(lo, hi)`.
    pub fn indices_within(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let h = self.spacing();
        // x_i = (i+1) h > lo  <=>  i > lo/h - 1
        let first = ((lo / h).floor() as isize).max(0) as usize;
        let last = ((hi / h).ceil() as isize - 1).clamp(0, self.n as isize) as usize;
        let mut start = first.min(self.n);
        while start < self.n && self.x(start) <= lo {
            start += 1;
        }
        let mut end = last.max(start).min(self.n);
        while end > start && self.x(end - 1) >= hi {
            end -= 1;
        }
        while end < self.n && self.x(end) < hi {
            end += 1;
        }
        start..end
    }

    pub fn check_resolves(&self, eta: f64) -> Result<()> {
        let limit = 1.0 / (RESOLUTION_FACTOR * eta);
        let h = self.spacing();
        if h > limit * (1.0 + 1e-12) {
            return Err(Error::UnderResolved { h, eta, limit });
        }
        Ok(())
    }
}

/// The wall profile `rho(s) = 35/32 (1 - s^2)^3` on `[-1, 1]`, zero outside.
///
/// It is C^2 (the third derivative jumps at `s = +-1`), non-negative, and
/// has unit mass.
#[inline]
pub fn rho(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    RHO_PEAK * u * u * u
}

/// Rescaled profile `eta * rho(eta * x)`; unit mass for every `eta > 0`.
#[inline]
pub fn rho_eta(x: f64, eta: f64) -> f64 {
    eta * rho(eta * x)
}

/// One wall: height `I`, sharpness `eta`, position `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallState {
    pub height: f64,
    pub sharpness: f64,
    pub position: f64,
}

impl WallState {
    pub fn new(height: f64, sharpness: f64, position: f64) -> Result<Self> {
        let wall = Self { height, sharpness, position };
        wall.validate()?;
        Ok(wall)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { height, sharpness, position } = *self;
        if !(height.is_finite() && height >= 0.0) {
            return Err(invalid(format!("wall height must be >= 0, got {height}")));
        }
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(invalid(format!("wall sharpness must be > 0, got {sharpness}")));
        }
        let (lo, hi) = self.support();
        if !(lo > 0.0 && hi < 1.0) {
            return Err(invalid(format!(
                "wall support [{lo}, {hi}] at a = {position}, eta = {sharpness} leaves (0, 1)"
            )));
        }
        Ok(())
    }

    /// Closed support `[a - 1/eta, a + 1/eta]`.
    pub fn support(&self) -> (f64, f64) {
        let w = 1.0 / self.sharpness;
        (self.position - w, self.position + w)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.height * rho_eta(x - self.position, self.sharpness)
    }
}

/// Superposition of walls `V(x) = sum_j I_j rho^{eta_j}(x - a_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    walls: Vec<WallState>,
}

impl PotentialField {
    pub fn new(walls: Vec<WallState>) -> Result<Self> {
        if walls.is_empty() {
            return Err(invalid("a potential field needs at least one wall"));
        }
        for w in &walls {
            w.validate()?;
        }
        Ok(Self { walls })
    }

    pub fn single(height: f64, sharpness: f64, position: f64) -> Result<Self> {
        Self::new(vec![WallState::new(height, sharpness, position)?])
    }

    pub fn walls(&self) -> &[WallState] {
        &self.walls
    }

    pub fn max_sharpness(&self) -> f64 {
        self.walls.iter().map(|w| w.sharpness).fold(0.0, f64::max)
    }

    /// Adds the potential to `out` (length `grid.len()`), touching only the
    /// grid points inside each wall support.
    pub fn accumulate(&self, grid: &SpatialGrid, out: &mut [f64]) -> Result<()> {
        accumulate_walls(&self.walls, grid, out)
    }
}

/// Adds the potential of `walls` to `out` without re-validating them.
pub(crate) fn accumulate_walls(walls: &[WallState], grid: &SpatialGrid, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(out.len(), grid.len());
    for wall in walls {
        grid.check_resolves(wall.sharpness)?;
        if wall.height == 0.0 {
            continue;
        }
        let (lo, hi) = wall.support();
        for i in grid.indices_within(lo, hi) {
            out[i] += wall.value(grid.x(i));
        }
    }
    Ok(())
}

/// Samples the potential on the interior grid points.
pub fn potential_on_grid(field: &PotentialField, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let mut v = vec![0.0; grid.len()];
    field.accumulate(grid, &mut v)?;
    Ok(v)
}
