//! Lowest eigenpairs of a real symmetric tridiagonal matrix.
//!
//! Eigenvalues come from bisection on the Sturm count; eigenvectors from
//! inverse iteration with a pivoted tridiagonal factorization, re-orthogonalized
//! against the vectors already found.

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e.len() == d.len() - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len(), "off-diagonal must have n - 1 entries");
        Self { d, e }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let n = self.d.len();
        (0..n)
            .map(|i| {
                let mut s = self.d[i].abs();
                if i > 0 {
                    s += self.e[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.e[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            let mut s = self.d[i] * x[i];
            if i > 0 {
                s += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.e[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let guard = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        let mut count = 0;
        let mut q = self.d[0] - x;
        for i in 0..self.d.len() {
            if i > 0 {
                let prev = if q.abs() < guard { -guard } else { q };
                q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / prev;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `m` smallest eigenvalues in ascending order, each bisected down to
    /// floating-point resolution.
    pub fn lowest_eigenvalues(&self, m: usize) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let span = (ghi - glo).abs().max(f64::MIN_POSITIVE);
        let mut values = Vec::with_capacity(m);
        let mut lower = glo - 1e-12 * span;
        for k in 0..m {
            // k-th eigenvalue: smallest x with sturm_count(x) > k
            let mut lo = lower;
            let mut hi = ghi + 1e-12 * span;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.sturm_count(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                let scale = lo.abs().max(hi.abs());
                if hi - lo <= 2.0 * f64::EPSILON * scale {
                    break;
                }
            }
            let value = 0.5 * (lo + hi);
            values.push(value);
            lower = lo;
        }
        values
    }

    /// Inverse iteration for the eigenvalue `lambda`, orthogonal (Euclidean) to
    /// every vector in `against`. Returns a unit Euclidean vector.
    pub fn inverse_iteration(&self, lambda: f64, against: &[Vec<f64>], iterations: usize) -> Vec<f64> {
        let n = self.d.len();
        let tiny = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        let lu = ShiftedLu::factor(self, lambda, tiny);
        // deterministic, non-symmetric start vector
        let mut x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
                1.0 + 0.5 * (t - t.floor())
            })
            .collect();
        orthogonalize(&mut x, against);
        normalize(&mut x);
        for _ in 0..iterations.max(1) {
            lu.solve(&mut x);
            orthogonalize(&mut x, against);
            if normalize(&mut x) == 0.0 {
                break;
            }
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 && nrm.is_finite() {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

fn orthogonalize(x: &mut [f64], against: &[Vec<f64>]) {
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let c = dot(x, q);
            x.iter_mut().zip(q).for_each(|(v, qi)| *v -= c * qi);
        }
    }
}

/// LU factorization of `T - lambda I` with partial pivoting (the `dgttrf`
/// layout: unit lower bidiagonal `l`, upper triangular with two superdiagonals).
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, lambda: f64, tiny: f64) -> Self {
        let n = t.d.len();
        let mut u0: Vec<f64> = t.d.iter().map(|d| d - lambda).collect();
        let mut u1: Vec<f64> = t.e.clone();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        // sub-diagonal of the working matrix
        let sub = &t.e;
        for i in 0..n.saturating_sub(1) {
            if u0[i].abs() >= sub[i].abs() {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                let f = sub[i] / u0[i];
                l[i] = f;
                u0[i + 1] -= f * u1[i];
            } else {
                // swap rows i and i+1
                let f = u0[i] / sub[i];
                u0[i] = sub[i];
                l[i] = f;
                let tmp = u1[i];
                u1[i] = u0[i + 1];
                u0[i + 1] = tmp - f * u0[i + 1];
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -f;
                }
                swapped[i] = true;
            }
        }
        if n > 0 && u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }
        for v in u0.iter_mut() {
            if v.abs() < tiny {
                *v = tiny.copysign(*v);
            }
        }
        Self { u0, u1, u2, l, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.u0.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.l[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
        // keep magnitudes bounded across iterations
        let m = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 1e150 {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        let h = 1.0 / (n as f64 + 1.0);
        SymTridiagonal::new(vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1])
    }

    #[test]
    fn sturm_count_matches_closed_form() {
        let n = 63;
        let t = laplacian(n);
        let h = 1.0 / (n as f64 + 1.0);
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 / (h * h) * (1.0 - (k as f64 * std::f64::consts::PI * h).cos()))
            .collect();
        for k in 0..n - 1 {
            let mid = 0.5 * (exact[k] + exact[k + 1]);
            assert_eq!(t.sturm_count(mid), k + 1);
        }
    }

    #[test]
    fn bisection_reproduces_discrete_laplacian() {
        let n = 255;
        let t = laplacian(n);
        let h = 1.0 / (n as f64 + 1.0);
        let vals = t.lowest_eigenvalues(6);
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * std::f64::consts::PI * h).cos());
            assert!((v - exact).abs() < 1e-9 * exact, "k={k}: {v} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_on_indefinite_shift() {
        // random-ish symmetric tridiagonal with a cluster
        let d = vec![4.0, 1.0, 3.0, 1.0 + 1e-9, 7.0, -2.0, 0.5];
        let e = vec![0.3, 1e-6, 0.2, 1e-6, 0.9, 0.1];
        let t = SymTridiagonal::new(d, e);
        let vals = t.lowest_eigenvalues(7);
        let mut found: Vec<Vec<f64>> = Vec::new();
        for &l in &vals {
            let v = t.inverse_iteration(l, &found, 4);
            let mut tv = vec![0.0; 7];
            t.apply(&v, &mut tv);
            let res: f64 = tv.iter().zip(&v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10, "residual {res}");
            for q in &found {
                assert!(dot(q, &v).abs() < 1e-10);
            }
            found.push(v);
        }
    }
}
