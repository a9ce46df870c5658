//! Spectrum of the Dirichlet Laplacian on the split interval `(0, a) ∪ (a, 1)`.
//!
//! Left modes have values `p^2 pi^2 / a^2`, right modes `q^2 pi^2 / (1 - a)^2`.
//! Rank bookkeeping is done in exact integer arithmetic: every `f64` in `(0, 1)`
//! is a dyadic rational `num / 2^s`, so comparing `p / a` against `q / (1 - a)`
//! reduces to comparing `p (den - num)` against `q num`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SpatialGrid;
use crate::propagate::WaveFunction;

/// Positions within this distance of a crossing `p / (p + q)` are treated as
/// degenerate splits.
pub const TOL_CROSS: f64 = 1e-6;

/// Largest closure the tracked-mode bookkeeping accepts.
pub const CLOSURE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A split-interval mode: the `index`-th mode of the left or right piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub side: Side,
    pub index: u64,
}

impl ModeLabel {
    pub fn left(p: u64) -> Self {
        assert!(p >= 1, "mode index starts at 1");
        Self { side: Side::Left, index: p }
    }

    pub fn right(q: u64) -> Self {
        assert!(q >= 1, "mode index starts at 1");
        Self { side: Side::Right, index: q }
    }

    /// Ideal eigenvalue at split position `a`.
    pub fn value(&self, a: f64) -> f64 {
        let k = self.index as f64 * PI;
        match self.side {
            Side::Left => k * k / (a * a),
            Side::Right => k * k / ((1.0 - a) * (1.0 - a)),
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Left => write!(f, "Left {}", self.index),
            Side::Right => write!(f, "Right {}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealMode {
    pub value: f64,
    pub label: ModeLabel,
}

/// The lowest `M` ideal eigenvalues at one split position, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealSpectrum {
    a: f64,
    entries: Vec<IdealMode>,
}

impl IdealSpectrum {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn entries(&self) -> &[IdealMode] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn labels(&self) -> Vec<ModeLabel> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `label`, if it is among the stored entries.
    pub fn rank_of(&self, label: ModeLabel) -> Option<usize> {
        self.entries.iter().position(|e| e.label == label).map(|i| i + 1)
    }
}

/// Merged ideal eigenvalues without the degeneracy check. Ties are ordered
/// left before right, matching [`rank_of`].
pub fn ideal_values(a: f64, m: usize) -> Vec<IdealMode> {
    let mut out = Vec::with_capacity(m);
    let (mut p, mut q) = (1u64, 1u64);
    while out.len() < m {
        let l = ModeLabel::left(p);
        let r = ModeLabel::right(q);
        // p / a <= q / (1 - a)  <=>  p (1 - a) <= q a
        if (p as f64) * (1.0 - a) <= (q as f64) * a {
            out.push(IdealMode { value: l.value(a), label: l });
            p += 1;
        } else {
            out.push(IdealMode { value: r.value(a), label: r });
            q += 1;
        }
    }
    out
}

/// The lowest `m` ideal eigenvalues at `a`, refusing positions within
/// [`TOL_CROSS`] of a crossing among the first `m + 1` modes.
pub fn ideal_spectrum(a: f64, m: usize) -> Result<IdealSpectrum> {
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("split position must lie in (0, 1), got {a}")));
    }
    if m == 0 {
        return Err(invalid("ideal spectrum needs at least one mode"));
    }
    check_non_crossing(a, m + 1)?;
    let entries = ideal_values(a, m);
    Ok(IdealSpectrum { a, entries })
}

/// Fails with `DegenerateSplit` if `a` is within [`TOL_CROSS`] of a crossing
/// between two of the lowest `m` ideal modes.
pub fn check_non_crossing(a: f64, m: usize) -> Result<()> {
    let modes = ideal_values(a, m);
    let lefts: Vec<u64> =
        modes.iter().filter(|e| e.label.side == Side::Left).map(|e| e.label.index).collect();
    let rights: Vec<u64> =
        modes.iter().filter(|e| e.label.side == Side::Right).map(|e| e.label.index).collect();
    for &p in &lefts {
        for &q in &rights {
            let crossing = p as f64 / (p + q) as f64;
            if (a - crossing).abs() < TOL_CROSS {
                return Err(Error::DegenerateSplit {
                    a,
                    crossing,
                    tol: TOL_CROSS,
                    left: ModeLabel::left(p),
                    right: ModeLabel::right(q),
                });
            }
        }
    }
    Ok(())
}

/// Grid sampling of `sqrt(2/a) sin(p pi x / a)` on `(0, a)` or
/// `sqrt(2/(1-a)) sin(q pi (1 - x) / (1 - a))` on `(a, 1)`, renormalized in
/// the discrete norm.
pub fn ideal_eigenfunction(label: ModeLabel, a: f64, grid: &SpatialGrid) -> WaveFunction {
    let k = label.index as f64 * PI;
    let values: Vec<f64> = grid
        .points()
        .map(|x| match label.side {
            Side::Left if x < a => (2.0 / a).sqrt() * (k * x / a).sin(),
            Side::Right if x > a => (2.0 / (1.0 - a)).sqrt() * (k * (1.0 - x) / (1.0 - a)).sin(),
            _ => 0.0,
        })
        .collect();
    let mut psi = WaveFunction::from_real(*grid, &values);
    let norm = psi.norm();
    if norm > 0.0 {
        psi.scale(1.0 / norm);
    }
    psi
}

/// `a = num / den` exactly, with `den` a power of two.
#[derive(Debug, Clone, Copy)]
struct Dyadic {
    num: u128,
    den: u128,
}

impl Dyadic {
    fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid(format!("split position must lie in (0, 1), got {a}")));
        }
        let bits = a.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        if exp == 0 {
            return Err(invalid(format!("split position {a} is subnormal")));
        }
        let mut m = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
        let mut s = 1075 - exp;
        let tz = (m.trailing_zeros() as i64).min(s);
        m >>= tz;
        s -= tz;
        if s > 100 {
            return Err(invalid(format!("split position {a} is too close to 0 for exact ranks")));
        }
        Ok(Self { num: m as u128, den: 1u128 << s })
    }

    fn rest(&self) -> u128 {
        self.den - self.num
    }
}

fn overflow() -> Error {
    invalid("mode index too large for exact rank arithmetic")
}

fn mul(x: u128, y: u128) -> Result<u128> {
    x.checked_mul(y).ok_or_else(overflow)
}

fn rank_exact(label: ModeLabel, d: Dyadic) -> Result<u64> {
    let k = label.index as u128;
    let below = match label.side {
        // right modes q with q a < p (1 - a), i.e. q num < p rest
        Side::Left => {
            let x = mul(k, d.rest())?;
            (x - 1) / d.num
        }
        // left modes p with p (1 - a) <= q a
        Side::Right => mul(k, d.num)? / d.rest(),
    };
    let rank = k + below;
    u64::try_from(rank).map_err(|_| overflow())
}

/// 1-based rank of `label` in the ideal spectrum at `a` (ties: left first).
pub fn rank_of(label: ModeLabel, a: f64) -> Result<u64> {
    rank_exact(label, Dyadic::new(a)?)
}

fn left_count_exact(k: u64, d: Dyadic) -> Result<u64> {
    // largest p in [0, k] with rank(Left p) <= k; the rank is increasing in p
    let (mut lo, mut hi) = (0u64, k);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if rank_exact(ModeLabel::left(mid), d)? <= k {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Number of left modes among the lowest `k` ideal modes at `a`.
pub fn left_count(k: u64, a: f64) -> Result<u64> {
    left_count_exact(k, Dyadic::new(a)?)
}

fn label_at_rank_exact(k: u64, d: Dyadic) -> Result<ModeLabel> {
    let p = left_count_exact(k, d)?;
    if p >= 1 && rank_exact(ModeLabel::left(p), d)? == k {
        Ok(ModeLabel::left(p))
    } else {
        Ok(ModeLabel::right(k - p))
    }
}

/// The label occupying rank `k` (1-based) at `a`.
pub fn label_at_rank(k: u64, a: f64) -> Result<ModeLabel> {
    if k == 0 {
        return Err(invalid("ranks start at 1"));
    }
    label_at_rank_exact(k, Dyadic::new(a)?)
}

/// `+1` if the rank-`k` mode at `a` is a left mode, `-1` otherwise.
pub fn xi(k: u64, a: f64) -> Result<i64> {
    Ok(match label_at_rank(k, a)?.side {
        Side::Left => 1,
        Side::Right => -1,
    })
}

/// `xi(1) + ... + xi(k)`, which equals `2 #left(k) - k`.
pub fn partial_sum(k: u64, a: f64) -> Result<i64> {
    let left = left_count(k, a)? as i64;
    Ok(2 * left - k as i64)
}

/// Rank at `a_f` of the label that has rank `k` at `a_i`.
pub fn track_rank(k: u64, a_i: f64, a_f: f64) -> Result<u64> {
    let label = label_at_rank(k, a_i)?;
    rank_of(label, a_f)
}

/// A crossing of the ideal curves of `left` and `right` at
/// `position = p / (p + q)`, where they occupy ranks `p + q - 1` and `p + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub position: f64,
    pub left: ModeLabel,
    pub right: ModeLabel,
}

impl Crossing {
    fn new(p: u64, q: u64) -> Self {
        Self {
            position: p as f64 / (p + q) as f64,
            left: ModeLabel::left(p),
            right: ModeLabel::right(q),
        }
    }

    /// The two adjacent ranks swapped by this crossing.
    pub fn ranks(&self) -> (u64, u64) {
        let s = self.left.index + self.right.index;
        (s - 1, s)
    }

    /// Exact comparison `p / (p + q)` against the dyadic `a`.
    fn cmp_exact(&self, d: Dyadic) -> Result<std::cmp::Ordering> {
        let p = self.left.index as u128;
        let s = p + self.right.index as u128;
        Ok(mul(p, d.den)?.cmp(&mul(s, d.num)?))
    }
}

/// Largest rank reached between `a_i` and `a_f` by the labels of rank `<= n`
/// at `a_i`. Ranks move monotonically in `a`, so the endpoints suffice.
pub fn tracked_closure(a_i: f64, a_f: f64, n: usize) -> Result<usize> {
    let mut m = n as u64;
    for k in 1..=n as u64 {
        m = m.max(track_rank(k, a_i, a_f)?);
    }
    let m = m as usize;
    if m > CLOSURE_CAP {
        return Err(Error::ClosureCap { needed: m, cap: CLOSURE_CAP });
    }
    Ok(m)
}

/// Crossings strictly inside `(a_lo, a_hi)` that involve at least one of the
/// labels ranked `<= n` at `a_lo`, sorted by position.
pub fn crossing_points(a_lo: f64, a_hi: f64, n: usize) -> Result<Vec<Crossing>> {
    if !(a_lo < a_hi) {
        return Err(invalid(format!("need a_lo < a_hi, got {a_lo} and {a_hi}")));
    }
    let m = tracked_closure(a_lo, a_hi, n)?;
    check_non_crossing(a_lo, m + 1)?;
    check_non_crossing(a_hi, m + 1)?;
    let lo = Dyadic::new(a_lo)?;
    let labels = (1..=n as u64).map(|k| label_at_rank_exact(k, lo)).collect::<Result<Vec<_>>>()?;
    crossings_of(&labels, a_lo, a_hi)
}

fn crossings_of(labels: &[ModeLabel], a_lo: f64, a_hi: f64) -> Result<Vec<Crossing>> {
    let lo = Dyadic::new(a_lo)?;
    let hi = Dyadic::new(a_hi)?;
    let mut found = Vec::new();
    for label in labels {
        let j = label.index;
        // p / (p + q) in (lo, hi)  <=>  q in (p (1-hi)/hi, p (1-lo)/lo)
        let (from, to) = match label.side {
            Side::Left => (j as f64 * (1.0 - a_hi) / a_hi, j as f64 * (1.0 - a_lo) / a_lo),
            Side::Right => (j as f64 * a_lo / (1.0 - a_lo), j as f64 * a_hi / (1.0 - a_hi)),
        };
        let first = (from.floor() as u64).max(1);
        let last = to.ceil() as u64 + 1;
        for other in first..=last {
            let c = match label.side {
                Side::Left => Crossing::new(j, other),
                Side::Right => Crossing::new(other, j),
            };
            let inside = c.cmp_exact(lo)? == std::cmp::Ordering::Greater
                && c.cmp_exact(hi)? == std::cmp::Ordering::Less;
            if inside && !found.contains(&c) {
                found.push(c);
            }
        }
    }
    found.sort_by(|x, y| {
        x.position.partial_cmp(&y.position).unwrap().then(x.ranks().0.cmp(&y.ranks().0))
    });
    Ok(found)
}

/// The rank image of `1..=n` under label tracking from `a_i` to `a_f`, with
/// the closure `m` of ranks visited on the way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<u64>,
    closure: usize,
}

impl Permutation {
    pub fn new(images: Vec<u64>, closure: usize) -> Result<Self> {
        let mut seen = images.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != images.len() || images.contains(&0) {
            return Err(invalid("permutation images must be distinct positive ranks"));
        }
        Ok(Self { images, closure })
    }

    pub fn identity(n: usize) -> Self {
        Self { images: (1..=n as u64).collect(), closure: n }
    }

    /// Image of the 1-based rank `k`.
    pub fn apply(&self, k: usize) -> u64 {
        self.images[k - 1]
    }

    pub fn images(&self) -> &[u64] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn closure(&self) -> usize {
        self.closure
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &k)| k == i as u64 + 1)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.images.iter().enumerate().map(|(i, k)| format!("{}->{}", i + 1, k)).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// `sigma(k)` for `k <= n`: the rank at `a_f` of the label ranked `k` at `a_i`.
pub fn quasi_adiabatic_permutation(a_i: f64, a_f: f64, n: usize) -> Result<Permutation> {
    if n == 0 {
        return Err(invalid("need at least one tracked mode"));
    }
    let m = tracked_closure(a_i, a_f, n)?;
    check_non_crossing(a_i, m + 1)?;
    check_non_crossing(a_f, m + 1)?;
    let images = (1..=n as u64).map(|k| track_rank(k, a_i, a_f)).collect::<Result<Vec<_>>>()?;
    Permutation::new(images, m)
}

/// Applies the adjacent transposition of each crossing, in the given order,
/// to the rank `k`.
pub fn track_rank_by_crossings(k: u64, crossings: &[Crossing]) -> u64 {
    crossings.iter().fold(k, |r, c| {
        let (lo, hi) = c.ranks();
        if r == lo {
            hi
        } else if r == hi {
            lo
        } else {
            r
        }
    })
}

/// Crossings met by the labels ranked `<= n` at `a_i` while the split moves
/// to `a_f`, in the order they are passed.
pub fn crossings_along(a_i: f64, a_f: f64, n: usize) -> Result<Vec<Crossing>> {
    if a_i == a_f {
        return Ok(Vec::new());
    }
    let m = tracked_closure(a_i, a_f, n)?;
    check_non_crossing(a_i, m + 1)?;
    check_non_crossing(a_f, m + 1)?;
    let tracked = (1..=n as u64).map(|k| label_at_rank(k, a_i)).collect::<Result<Vec<_>>>()?;
    let (lo, hi) = if a_i < a_f { (a_i, a_f) } else { (a_f, a_i) };
    let mut found = crossings_of(&tracked, lo, hi)?;
    if a_i > a_f {
        found.reverse();
    }
    Ok(found)
}

/// The quasi-adiabatic permutation assembled from the transpositions of the
/// individual crossings rather than from endpoint ranks.
pub fn crossing_permutation(a_i: f64, a_f: f64, n: usize) -> Result<Permutation> {
    let m = tracked_closure(a_i, a_f, n)?;
    let crossings = crossings_along(a_i, a_f, n)?;
    let images = (1..=n as u64).map(|k| track_rank_by_crossings(k, &crossings)).collect();
    Permutation::new(images, m)
}
