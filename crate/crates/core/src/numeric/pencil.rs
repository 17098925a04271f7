//! Smallest eigenpairs of a symmetric-definite tridiagonal pencil `A x = mu B x`.
//!
//! Eigenvalues are isolated by bisection on the inertia of `A - sigma B`
//! (Sylvester's law: with `B` positive definite, the number of negative pivots
//! in the LDL^T factorization equals the number of eigenvalues below `sigma`).
//! Eigenvectors then come from a few steps of inverse iteration, each a
//! tridiagonal solve, so the whole computation is linear in the matrix size per
//! eigenpair.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Number of eigenvalues of the pencil strictly below `sigma`.
fn count_below(a: &SymTridiagonal, b: &SymTridiagonal, sigma: f64, pivmin: f64) -> usize {
    let n = a.len();
    let mut count = 0;
    let mut d = a.diag[0] - sigma * b.diag[0];
    if d.abs() < pivmin {
        d = -pivmin;
    }
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let e = a.off[i - 1] - sigma * b.off[i - 1];
        d = (a.diag[i] - sigma * b.diag[i]) - e * e / d;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves a general tridiagonal system with partial pivoting (in the manner of LAPACK `gtsv`).
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut dl = sub.to_vec();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = rhs.to_vec();
    let tiny = f64::MIN_POSITIVE.sqrt();
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            x[i + 1] -= f * x[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            x.swap(i, i + 1);
            x[i + 1] -= f * x[i];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    x[n - 1] /= d[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    x
}

/// The `count` smallest eigenpairs of `a x = mu b x`, ascending, with `b`-orthonormal vectors.
///
/// Both matrices must be symmetric and `b` (and here also `a`) positive definite.
pub fn smallest_generalized_eigenpairs(
    a: &SymTridiagonal,
    b: &SymTridiagonal,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if b.len() != n || count == 0 || count > n {
        return Err(Error::Spectral(format!(
            "cannot extract {count} eigenpairs from a pencil of size {n}"
        )));
    }
    let scale = a
        .diag
        .iter()
        .chain(&a.off)
        .chain(&b.diag)
        .chain(&b.off)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let pivmin = f64::MIN_POSITIVE.max(scale * 1e-300);

    // Bracket: all eigenvalues are positive, find an upper bound covering `count` of them.
    let mut hi = 1.0;
    let mut guard = 0;
    while count_below(a, b, hi, pivmin) < count {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::Spectral("could not bracket eigenvalues".into()));
        }
    }
    if count_below(a, b, 0.0, pivmin) != 0 {
        return Err(Error::Spectral("pencil is not positive definite".into()));
    }

    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let (mut lo, mut up) = (values.last().copied().unwrap_or(0.0) * (1.0 - 1e-15), hi);
        for _ in 0..256 {
            let mid = 0.5 * (lo + up);
            if mid <= lo || mid >= up {
                break;
            }
            if count_below(a, b, mid, pivmin) > k {
                up = mid;
            } else {
                lo = mid;
            }
            if up - lo <= 4.0 * f64::EPSILON * up.abs() {
                break;
            }
        }
        values.push(0.5 * (lo + up));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (k, &mu) in values.iter().enumerate() {
        let sub: Vec<f64> = a.off.iter().zip(&b.off).map(|(x, y)| x - mu * y).collect();
        let diag: Vec<f64> = a.diag.iter().zip(&b.diag).map(|(x, y)| x - mu * y).collect();
        // Deterministic, non-degenerate start vector.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * (k as f64 + 1.7)).sin())
            .collect();
        for _ in 0..4 {
            let rhs = b.mul_vec(&v);
            v = solve_tridiagonal(&sub, &diag, &sub, &rhs);
            for prev in &vectors {
                let proj = b.quad_form(prev, &v);
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= proj * pi;
                }
            }
            let norm = b.quad_form(&v, &v).sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Spectral(format!("inverse iteration broke down for eigenpair {k}")));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let residual: f64 = {
            let av = a.mul_vec(&v);
            let bv = b.mul_vec(&v);
            av.iter().zip(&bv).map(|(x, y)| (x - mu * y).powi(2)).sum::<f64>().sqrt()
        };
        let ref_norm = a.mul_vec(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual > 1e-6 * ref_norm.max(1e-300) {
            return Err(Error::Spectral(format!(
                "inverse iteration did not converge for eigenpair {k} (residual {residual:e})"
            )));
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn to_dense(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.off[i];
                m[(i + 1, i)] = t.off[i];
            }
        }
        m
    }

    fn sample_pencil(n: usize) -> (SymTridiagonal, SymTridiagonal) {
        let mut a = SymTridiagonal::zeros(n);
        let mut b = SymTridiagonal::zeros(n);
        for i in 0..n {
            let w = 1.0 + 0.3 * (i as f64 * 0.7).sin();
            a.diag[i] = 2.5 * w + 0.1;
            b.diag[i] = 4.0 * w;
            if i + 1 < n {
                a.off[i] = -1.2 * w;
                b.off[i] = 1.0 * w;
            }
        }
        (a, b)
    }

    #[test]
    fn matches_dense_cholesky_reduction() {
        let (a, b) = sample_pencil(60);
        let (vals, vecs) = smallest_generalized_eigenpairs(&a, &b, 6).unwrap();
        // Oracle: B = L L^T, C = L^{-1} A L^{-T}, dense symmetric eigen.
        let ad = to_dense(&a);
        let bd = to_dense(&b);
        let chol = bd.clone().cholesky().unwrap();
        let l = chol.l();
        let linv = l.clone().try_inverse().unwrap();
        let c = &linv * &ad * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut dense: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (k, v) in vals.iter().enumerate() {
            assert!((v - dense[k]).abs() < 1e-10 * dense[k].abs().max(1.0), "{k}: {v} vs {}", dense[k]);
        }
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let g = b.quad_form(&vecs[i], &vecs[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tridiagonal_solver_handles_pivoting() {
        let sub = vec![3.0, 1.0, 2.0];
        let diag = vec![0.0, 1.0, 5.0, 1.0];
        let sup = vec![1.0, 4.0, 1.0];
        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += sub[i - 1] * x_true[i - 1];
            }
            if i < 3 {
                rhs[i] += sup[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_request() {
        let (a, b) = sample_pencil(4);
        assert!(smallest_generalized_eigenpairs(&a, &b, 5).is_err());
    }
}
