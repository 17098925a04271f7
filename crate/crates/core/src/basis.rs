//! Multi-index sets and tensor-product evaluation of the multivariate basis.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poincare1d::PoincareBasis1D;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Unit degree `degree` in coordinate `i`, zero elsewhere.
    pub fn univariate(dim: usize, i: usize, degree: u32) -> Self {
        let mut v = vec![0; dim];
        v[i] = degree;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Number of coordinates with a nonzero entry.
    pub fn interaction_order(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }

    /// `(sum alpha_i^q)^(1/q)`.
    pub fn q_norm(&self, q: f64) -> f64 {
        self.0.iter().map(|&a| (a as f64).powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Truncation scheme: `q = 1` is the total-degree set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub p: u32,
    pub q: f64,
}

impl Truncation {
    pub fn total_degree(p: u32) -> Self {
        Self { p, q: 1.0 }
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        let budget = (self.p as f64).powf(self.q);
        let used: f64 = alpha.entries().iter().map(|&a| (a as f64).powf(self.q)).sum();
        used <= budget + 1e-10 * budget.max(1.0)
    }
}

/// All multi-indices with `sum alpha_i <= p`, in graded-lexicographic order.
pub fn total_degree(dim: usize, p: u32) -> Vec<MultiIndex> {
    enumerate(dim, Truncation::total_degree(p))
}

/// All multi-indices with `||alpha||_q <= p`, in graded-lexicographic order.
pub fn hyperbolic(dim: usize, p: u32, q: f64) -> Result<Vec<MultiIndex>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidQuasiNorm(q));
    }
    Ok(enumerate(dim, Truncation { p, q }))
}

/// Depth-first enumeration pruned on the partial q-sum, then sorted by total
/// degree and, within a degree, with larger leading entries first.
fn enumerate(dim: usize, t: Truncation) -> Vec<MultiIndex> {
    let budget = (t.p as f64).powf(t.q);
    let slack = 1e-10 * budget.max(1.0);
    let pow: Vec<f64> = (0..=t.p).map(|a| (a as f64).powf(t.q)).collect();
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];

    fn rec(
        k: usize,
        used: f64,
        degree: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
        pow: &[f64],
        budget: f64,
        slack: f64,
        p: u32,
    ) {
        if k == current.len() {
            out.push(MultiIndex(current.clone()));
            return;
        }
        for a in 0..=(p - degree) {
            let u = used + pow[a as usize];
            if u > budget + slack {
                break;
            }
            current[k] = a;
            rec(k + 1, u, degree + a, current, out, pow, budget, slack, p);
        }
        current[k] = 0;
    }

    if dim == 0 {
        return vec![MultiIndex(Vec::new())];
    }
    rec(0, 0.0, 0, &mut current, &mut out, &pow, budget, slack, t.p);
    out.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| b.0.cmp(&a.0)));
    out
}

/// Enumerated multivariate basis over `d` one-dimensional Poincaré bases.
#[derive(Debug, Clone)]
pub struct BasisSet {
    indices: Vec<MultiIndex>,
    /// Nonzero `(coordinate, degree)` pairs of each index.
    sparse: Vec<Vec<(usize, usize)>>,
    bases: Vec<Arc<PoincareBasis1D>>,
    truncation: Truncation,
    lookup: HashMap<MultiIndex, usize>,
    max_degree: usize,
}

impl BasisSet {
    /// Basis set for truncation `t` over the given univariate bases.
    pub fn new(bases: Vec<Arc<PoincareBasis1D>>, t: Truncation) -> Result<Self> {
        let indices = if t.q == 1.0 {
            total_degree(bases.len(), t.p)
        } else {
            hyperbolic(bases.len(), t.p, t.q)?
        };
        Self::from_indices(bases, indices, t)
    }

    pub fn from_indices(bases: Vec<Arc<PoincareBasis1D>>, indices: Vec<MultiIndex>, t: Truncation) -> Result<Self> {
        let d = bases.len();
        if d == 0 {
            return Err(Error::Empty("basis set needs at least one input".into()));
        }
        let mut lookup = HashMap::with_capacity(indices.len());
        let mut sparse = Vec::with_capacity(indices.len());
        let mut max_degree = 0;
        for (pos, alpha) in indices.iter().enumerate() {
            if alpha.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "multi-index {alpha} has dimension {}, expected {d}",
                    alpha.dim()
                )));
            }
            let nz: Vec<(usize, usize)> = alpha
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(i, &a)| (i, a as usize))
                .collect();
            for &(i, a) in &nz {
                if a > bases[i].p_max() {
                    return Err(Error::OrderOutOfRange { order: a, max: bases[i].p_max() });
                }
                max_degree = max_degree.max(a);
            }
            if lookup.insert(alpha.clone(), pos).is_some() {
                return Err(Error::DimensionMismatch(format!("duplicate multi-index {alpha}")));
            }
            sparse.push(nz);
        }
        Ok(Self { indices, sparse, bases, truncation: t, lookup, max_degree })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn bases(&self) -> &[Arc<PoincareBasis1D>] {
        &self.bases
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Positions of the indices with `alpha_i >= 1`.
    pub fn derivative_positions(&self, i: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, a)| a.get(i) >= 1)
            .map(|(k, _)| k)
            .collect()
    }

    fn check_input(&self, i: usize) -> Result<()> {
        if i < self.dim() {
            Ok(())
        } else {
            Err(Error::InputOutOfRange { index: i, dim: self.dim() })
        }
    }

    fn tables(&self, x: &[f64], with_derivatives: bool) -> Result<Tables> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, basis has {}",
                x.len(),
                self.dim()
            )));
        }
        let width = self.max_degree + 1;
        let mut values = vec![0.0; self.dim() * width];
        let mut derivs = if with_derivatives { vec![0.0; self.dim() * width] } else { Vec::new() };
        for (i, basis) in self.bases.iter().enumerate() {
            let xi = basis.check_point(x[i])?;
            basis.fill_values(xi, &mut values[i * width..(i + 1) * width]);
            if with_derivatives {
                basis.fill_derivatives(xi, &mut derivs[i * width..(i + 1) * width]);
            }
        }
        Ok(Tables { width, values, derivs })
    }

    /// `Phi_alpha(x)` for every index, in basis order (`x` in standard coordinates).
    pub fn eval_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.tables(x, false)?;
        Ok(self
            .sparse
            .iter()
            .map(|nz| nz.iter().map(|&(i, a)| t.value(i, a)).product())
            .collect())
    }

    /// `(1 / sqrt(lambda_{i, alpha_i})) dPhi_alpha / dx_i` over the indices with
    /// `alpha_i >= 1`, in the order of [`Self::derivative_positions`].
    pub fn eval_deriv_row(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(i)?;
        let t = self.tables(x, true)?;
        let inv_sqrt: Vec<f64> = self.bases[i].eigenvalues().iter().map(|l| 1.0 / l.sqrt()).collect();
        Ok(self
            .sparse
            .iter()
            .filter(|nz| nz.iter().any(|&(j, _)| j == i))
            .map(|nz| {
                nz.iter()
                    .map(|&(j, a)| if j == i { t.deriv(j, a) * inv_sqrt[a] } else { t.value(j, a) })
                    .product()
            })
            .collect())
    }

    /// Unnormalized gradient `dPhi_alpha / dx_i` for all `i`, as a `d x P` row-major buffer.
    pub fn eval_gradient(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let t = self.tables(x, true)?;
        Ok((0..self.dim())
            .map(|i| {
                self.sparse
                    .iter()
                    .map(|nz| {
                        if nz.iter().any(|&(j, _)| j == i) {
                            nz.iter()
                                .map(|&(j, a)| if j == i { t.deriv(j, a) } else { t.value(j, a) })
                                .product()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Regression matrix with one row per point.
    pub fn matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(points.len(), self.len());
        for (k, x) in points.iter().enumerate() {
            let row = self.eval_row(x)?;
            for (j, v) in row.into_iter().enumerate() {
                m[(k, j)] = v;
            }
        }
        Ok(m)
    }

    /// Normalized partial-derivative regression matrix and the basis positions of its columns.
    pub fn deriv_matrix(&self, i: usize, points: &[Vec<f64>]) -> Result<(DMatrix<f64>, Vec<usize>)> {
        let positions = self.derivative_positions(i);
        let mut m = DMatrix::zeros(points.len(), positions.len());
        for (k, x) in points.iter().enumerate() {
            let row = self.eval_deriv_row(i, x)?;
            for (j, v) in row.into_iter().enumerate() {
                m[(k, j)] = v;
            }
        }
        Ok((m, positions))
    }

    /// `sum_k coefficients[k] Phi_k(x)`.
    pub fn eval_combination(&self, coefficients: &[f64], x: &[f64]) -> Result<f64> {
        let t = self.tables(x, false)?;
        Ok(self
            .sparse
            .iter()
            .zip(coefficients)
            .filter(|(_, &c)| c != 0.0)
            .map(|(nz, &c)| c * nz.iter().map(|&(i, a)| t.value(i, a)).product::<f64>())
            .sum())
    }
}

struct Tables {
    width: usize,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl Tables {
    #[inline]
    fn value(&self, i: usize, a: usize) -> f64 {
        self.values[i * self.width + a]
    }

    #[inline]
    fn deriv(&self, i: usize, a: usize) -> f64 {
        self.derivs[i * self.width + a]
    }
}
