use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{partial_sum, track_rank, xi};

/// Above this the stochastic index is tracked by its logarithm.
const EXACT_LIMIT: f64 = 9.007_199_254_740_992e15; // 2^53

/// Largest rank followed by [`growth_exact`].
pub const ORBIT_CAP: u64 = 1_000_000_000_000_000;

/// A mode index, exact while it fits in a double's integer range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthIndex {
    Exact(u64),
    /// Natural logarithm of an index too large to hold exactly.
    Log(f64),
}

impl GrowthIndex {
    pub fn ln(&self) -> f64 {
        match *self {
            GrowthIndex::Exact(k) => (k as f64).ln(),
            GrowthIndex::Log(l) => l,
        }
    }
}

/// Independent-label model of repeated permutation cycles: a rank-`k` mode
/// is a left mode at `a_i` with probability `beta`, and a fraction `gamma`
/// of the modes at `a_f` are left modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthModel {
    pub beta: f64,
    pub gamma: f64,
    pub k: GrowthIndex,
}

impl GrowthModel {
    pub fn new(beta: f64, gamma: f64, k: u64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0 && gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("beta and gamma must lie in (0, 1), got {beta} and {gamma}")));
        }
        if k == 0 {
            return Err(invalid("mode indices start at 1"));
        }
        Ok(Self { beta, gamma, k: GrowthIndex::Exact(k) })
    }
}

/// `beta ln(beta/gamma) + (1 - beta) ln((1 - beta)/(1 - gamma))`.
pub fn expected_log_increment(beta: f64, gamma: f64) -> f64 {
    beta * (beta / gamma).ln() + (1.0 - beta) * ((1.0 - beta) / (1.0 - gamma)).ln()
}

/// One cycle of the model driven by the uniform variate `u` in `[0, 1)`:
/// `k` becomes `round(k beta/gamma)` when `u < beta`, otherwise
/// `round(k (1 - beta)/(1 - gamma))`, never below one.
pub fn growth_step(model: &GrowthModel, u: f64) -> GrowthIndex {
    let factor =
        if u < model.beta { model.beta / model.gamma } else { (1.0 - model.beta) / (1.0 - model.gamma) };
    match model.k {
        GrowthIndex::Exact(k) => {
            let next = (k as f64 * factor).round().max(1.0);
            if next < EXACT_LIMIT {
                GrowthIndex::Exact(next as u64)
            } else {
                GrowthIndex::Log(next.ln())
            }
        }
        GrowthIndex::Log(l) => {
            let next = l + factor.ln();
            if next < EXACT_LIMIT.ln() - 1.0 {
                GrowthIndex::Exact(next.exp().round().max(1.0) as u64)
            } else {
                GrowthIndex::Log(next)
            }
        }
    }
}

/// Sample statistics of the per-cycle log-increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub steps: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Closed-form expectation for the model's `beta`, `gamma`.
    pub expected: f64,
    pub final_index: GrowthIndex,
}

impl GrowthStats {
    /// Distance of the sample mean from the expectation in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected) / self.stderr
    }
}

/// Runs `steps` cycles of the model and summarizes `ln k_{n+1} - ln k_n`.
/// With `trace`, the visited indices are appended to it.
pub fn simulate_growth<R: Rng + ?Sized>(
    model: &GrowthModel,
    steps: usize,
    rng: &mut R,
    mut trace: Option<&mut Vec<GrowthIndex>>,
) -> Result<GrowthStats> {
    if steps < 2 {
        return Err(invalid("need at least two steps for a standard error"));
    }
    let mut m = *model;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    if let Some(t) = trace.as_deref_mut() {
        t.push(m.k);
    }
    for _ in 0..steps {
        let next = growth_step(&m, rng.gen::<f64>());
        let d = next.ln() - m.k.ln();
        sum += d;
        sum_sq += d * d;
        m.k = next;
        if let Some(t) = trace.as_deref_mut() {
            t.push(next);
        }
    }
    let n = steps as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(GrowthStats {
        steps,
        mean,
        stderr: (var / n).sqrt(),
        expected: expected_log_increment(model.beta, model.gamma),
        final_index: m.k,
    })
}

/// Long-run behaviour of an exact orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    /// The orbit revisited an index; `period` is the cycle length.
    Looped { period: usize },
    /// No revisit within the cycles computed.
    Open,
}

/// Orbit `k_n = sigma^n(k_0)` of the quasi-adiabatic permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthOrbit {
    pub a_i: f64,
    pub a_f: f64,
    pub indices: Vec<u64>,
    /// `ln k_{n+1} - ln k_n` for each cycle.
    pub log_increments: Vec<f64>,
    pub kind: OrbitKind,
}

impl GrowthOrbit {
    pub fn mean_log_increment(&self) -> f64 {
        if self.log_increments.is_empty() {
            0.0
        } else {
            self.log_increments.iter().sum::<f64>() / self.log_increments.len() as f64
        }
    }
}

/// Follows `k0` through `n_cycles` applications of the permutation from
/// `a_i` to `a_f`, checking at every step the balance
/// `k + xi(k) S(k) = k' + xi(k) S'(k')` of left and right modes below the
/// tracked one. Stops early once an index repeats.
pub fn growth_exact(a_i: f64, a_f: f64, k0: u64, n_cycles: usize) -> Result<GrowthOrbit> {
    if k0 == 0 {
        return Err(invalid("mode indices start at 1"));
    }
    let mut indices = vec![k0];
    let mut seen = std::collections::HashMap::from([(k0, 0usize)]);
    let mut kind = OrbitKind::Open;
    let mut k = k0;
    for n in 1..=n_cycles {
        if k > ORBIT_CAP {
            return Err(Error::ClosureExceeded { cap: ORBIT_CAP, partial: indices });
        }
        let next = match track_rank(k, a_i, a_f) {
            Ok(r) => r,
            Err(Error::InvalidParameter(_)) => {
                return Err(Error::ClosureExceeded { cap: ORBIT_CAP, partial: indices })
            }
            Err(e) => return Err(e),
        };
        let side = xi(k, a_i)?;
        let lhs = k as i128 + i128::from(side * partial_sum(k, a_i)?);
        let rhs = next as i128 + i128::from(side * partial_sum(next, a_f)?);
        if lhs != rhs {
            return Err(invalid(format!("rank balance fails at k = {k}: {lhs} != {rhs}")));
        }
        indices.push(next);
        k = next;
        if let Some(&first) = seen.get(&next) {
            kind = OrbitKind::Looped { period: n - first };
            break;
        }
        seen.insert(next, n);
    }
    if k > ORBIT_CAP {
        return Err(Error::ClosureExceeded { cap: ORBIT_CAP, partial: indices });
    }
    let log_increments = indices.windows(2).map(|w| (w[1] as f64 / w[0] as f64).ln()).collect();
    Ok(GrowthOrbit { a_i, a_f, indices, log_increments, kind })
}
