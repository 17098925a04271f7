//! One-dimensional Poincaré bases: eigenfunctions of `f'' - V' f' = -lambda f`
//! with Neumann boundary conditions, orthonormal in `L2(rho)`.
//!
//! Uniform laws use the closed-form cosine basis, the untruncated standard
//! Gaussian uses normalized Hermite polynomials, and everything else goes
//! through a linear finite element discretization on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{Family, Marginal};
use crate::numeric::{composite, smallest_generalized_eigenpairs, ClampedSpline, GaussRule, SymTridiagonal};

/// Grid resolution used when none is requested.
pub const DEFAULT_GRID_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    AnalyticCosine,
    AnalyticHermite,
    Fem,
}

#[derive(Debug, Clone)]
enum Repr {
    Cosine { lower: f64, width: f64 },
    Hermite,
    Fem(FemFunctions),
}

#[derive(Debug, Clone)]
struct FemFunctions {
    lower: f64,
    upper: f64,
    fd_step: f64,
    /// Index `alpha - 1`.
    splines: Vec<ClampedSpline>,
    value_scale: Vec<f64>,
    deriv_scale: Vec<f64>,
}

impl FemFunctions {
    fn raw_derivative(&self, k: usize, x: f64) -> f64 {
        if x <= self.lower || x >= self.upper {
            return 0.0;
        }
        let lo = (x - self.fd_step).max(self.lower);
        let hi = (x + self.fd_step).min(self.upper);
        let s = &self.splines[k];
        (s.eval(hi) - s.eval(lo)) / (hi - lo)
    }
}

/// Ordered eigenpairs `(lambda_alpha, phi_alpha)` for `alpha = 0..=p_max`.
#[derive(Debug, Clone)]
pub struct PoincareBasis1D {
    marginal: Marginal,
    eigenvalues: Vec<f64>,
    grid_n: usize,
    repr: Repr,
}

impl PoincareBasis1D {
    /// Picks the analytic branch when one applies, otherwise the finite element solve.
    ///
    /// `marginal` is expected in standard coordinates (see [`crate::marginals::prepare`]).
    pub fn build(marginal: &Marginal, p_max: usize, grid_n: usize) -> Result<Self> {
        match marginal.family {
            Family::Uniform { .. } => Self::build_analytic_uniform(marginal, p_max),
            Family::Gaussian { mean, std } if marginal.is_untruncated_gaussian() && mean == 0.0 && std == 1.0 => {
                Self::build_analytic_hermite(marginal, p_max)
            }
            _ => Self::build_fem(marginal, p_max, grid_n),
        }
    }

    /// `phi_alpha(x) = sqrt(2) cos(alpha pi (x - a) / (b - a))`, `lambda_alpha = (alpha pi / (b - a))^2`.
    pub fn build_analytic_uniform(marginal: &Marginal, p_max: usize) -> Result<Self> {
        let Family::Uniform { .. } = marginal.family else {
            return Err(Error::UnsupportedFamily(format!(
                "cosine basis needs a uniform law, got {}",
                marginal.family.name()
            )));
        };
        let (a, b) = marginal.support();
        let width = b - a;
        let eigenvalues = (0..=p_max)
            .map(|k| (k as f64 * std::f64::consts::PI / width).powi(2))
            .collect();
        Ok(Self {
            marginal: *marginal,
            eigenvalues,
            grid_n: 0,
            repr: Repr::Cosine { lower: a, width },
        })
    }

    /// Normalized probabilists' Hermite polynomials with `lambda_alpha = alpha`.
    pub fn build_analytic_hermite(marginal: &Marginal, p_max: usize) -> Result<Self> {
        match marginal.family {
            Family::Gaussian { mean, std } if mean == 0.0 && std == 1.0 && marginal.is_untruncated_gaussian() => {}
            _ => {
                return Err(Error::UnsupportedFamily(
                    "Hermite basis needs the untruncated standard Gaussian".into(),
                ))
            }
        }
        Ok(Self {
            marginal: *marginal,
            eigenvalues: (0..=p_max).map(|k| k as f64).collect(),
            grid_n: 0,
            repr: Repr::Hermite,
        })
    }

    /// Linear finite elements on `grid_n` uniform nodes, shifted generalized
    /// eigenproblem `K a = (lambda + 1) M a` with `K = M + S`.
    pub fn build_fem(marginal: &Marginal, p_max: usize, grid_n: usize) -> Result<Self> {
        if !marginal.is_bounded() {
            return Err(Error::Assembly("finite elements need a bounded support".into()));
        }
        if grid_n < p_max + 3 || grid_n < 3 {
            return Err(Error::Assembly(format!(
                "grid of {grid_n} nodes is too coarse for order {p_max}"
            )));
        }
        let (a, b) = marginal.support();
        let n = grid_n;
        let h = (b - a) / (n - 1) as f64;
        let node = |j: usize| if j + 1 == n { b } else { a + j as f64 * h };

        for j in 1..n - 1 {
            let rho = marginal.density_unchecked(node(j));
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::Assembly(format!("non-positive density {rho} at node x = {}", node(j))));
            }
        }

        let mut mass = SymTridiagonal::zeros(n);
        let mut stiff = SymTridiagonal::zeros(n);
        for e in 0..n - 1 {
            let (x0, x1) = (node(e), node(e + 1));
            let len = x1 - x0;
            let (mut m00, mut m01, mut m11, mut s) = (0.0, 0.0, 0.0, 0.0);
            for (x, w) in GaussRule::THREE.mapped(x0, x1) {
                let rho = marginal.density_unchecked(x);
                if !(rho.is_finite() && rho > 0.0) {
                    return Err(Error::Assembly(format!("non-positive density {rho} at x = {x}")));
                }
                let n0 = (x1 - x) / len;
                let n1 = (x - x0) / len;
                m00 += w * rho * n0 * n0;
                m01 += w * rho * n0 * n1;
                m11 += w * rho * n1 * n1;
                s += w * rho;
            }
            let s = s / (len * len);
            mass.diag[e] += m00;
            mass.diag[e + 1] += m11;
            mass.off[e] += m01;
            stiff.diag[e] += s;
            stiff.diag[e + 1] += s;
            stiff.off[e] -= s;
        }
        let shifted = SymTridiagonal {
            diag: mass.diag.iter().zip(&stiff.diag).map(|(m, s)| m + s).collect(),
            off: mass.off.iter().zip(&stiff.off).map(|(m, s)| m + s).collect(),
        };

        let (mus, vectors) = smallest_generalized_eigenpairs(&shifted, &mass, p_max + 1)?;
        let mut eigenvalues: Vec<f64> = mus.iter().map(|mu| mu - 1.0).collect();
        eigenvalues[0] = 0.0;
        for k in 1..eigenvalues.len() {
            if !(eigenvalues[k] > eigenvalues[k - 1]) {
                return Err(Error::Spectral(format!(
                    "eigenvalues not strictly increasing at order {k}: {:?}",
                    &eigenvalues[..=k]
                )));
            }
        }

        let fd_step = (b - a) / (10.0 * n as f64);
        let mut fem = FemFunctions {
            lower: a,
            upper: b,
            fd_step,
            splines: Vec::with_capacity(p_max),
            value_scale: Vec::with_capacity(p_max),
            deriv_scale: Vec::with_capacity(p_max),
        };
        for (k, mut v) in vectors.into_iter().enumerate().skip(1) {
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let spline = ClampedSpline::new(a, h, v);
            fem.splines.push(spline);
            let idx = k - 1;
            let sq = composite(
                |x| fem.splines[idx].eval(x).powi(2) * marginal.density_unchecked(x),
                a,
                b,
                n - 1,
                GaussRule::FIVE,
            );
            let dsq = composite(
                |x| fem.raw_derivative(idx, x).powi(2) * marginal.density_unchecked(x),
                a,
                b,
                n - 1,
                GaussRule::FIVE,
            );
            if !(sq > 0.0 && dsq > 0.0) {
                return Err(Error::Spectral(format!("degenerate eigenfunction at order {k}")));
            }
            fem.value_scale.push(1.0 / sq.sqrt());
            fem.deriv_scale.push(eigenvalues[k].sqrt() / dsq.sqrt());
        }

        Ok(Self {
            marginal: *marginal,
            eigenvalues,
            grid_n,
            repr: Repr::Fem(fem),
        })
    }

    pub fn kind(&self) -> BasisKind {
        match self.repr {
            Repr::Cosine { .. } => BasisKind::AnalyticCosine,
            Repr::Hermite => BasisKind::AnalyticHermite,
            Repr::Fem(_) => BasisKind::Fem,
        }
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn p_max(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    /// Grid resolution of the finite element branch (0 for analytic bases).
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, alpha: usize) -> Result<f64> {
        self.eigenvalues
            .get(alpha)
            .copied()
            .ok_or(Error::OrderOutOfRange { order: alpha, max: self.p_max() })
    }

    /// `C_P = 1 / lambda_1`.
    pub fn poincare_constant(&self) -> Result<f64> {
        Ok(1.0 / self.eigenvalue(1)?)
    }

    /// Validates `x` against the support, absorbing round-off at the bounds.
    pub fn check_point(&self, x: f64) -> Result<f64> {
        let (a, b) = self.marginal.support();
        if !x.is_finite() && !(a.is_infinite() && b.is_infinite()) {
            return Err(Error::OutOfSupport { value: x, lower: a, upper: b });
        }
        let tol = if a.is_finite() && b.is_finite() { 1e-9 * (b - a) } else { 0.0 };
        if x < a - tol || x > b + tol || x.is_nan() {
            return Err(Error::OutOfSupport { value: x, lower: a, upper: b });
        }
        Ok(x.clamp(a, b))
    }

    fn check_order(&self, alpha: usize) -> Result<()> {
        if alpha > self.p_max() {
            Err(Error::OrderOutOfRange { order: alpha, max: self.p_max() })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, alpha: usize, x: f64) -> Result<f64> {
        self.check_order(alpha)?;
        let x = self.check_point(x)?;
        Ok(self.value_unchecked(alpha, x))
    }

    pub fn eval_deriv(&self, alpha: usize, x: f64) -> Result<f64> {
        self.check_order(alpha)?;
        let x = self.check_point(x)?;
        Ok(self.derivative_unchecked(alpha, x))
    }

    fn value_unchecked(&self, alpha: usize, x: f64) -> f64 {
        if alpha == 0 {
            return 1.0;
        }
        match &self.repr {
            Repr::Cosine { lower, width } => {
                std::f64::consts::SQRT_2 * (alpha as f64 * std::f64::consts::PI * (x - lower) / width).cos()
            }
            Repr::Hermite => {
                let mut out = vec![0.0; alpha + 1];
                hermite_values(x, &mut out);
                out[alpha]
            }
            Repr::Fem(f) => f.splines[alpha - 1].eval(x) * f.value_scale[alpha - 1],
        }
    }

    fn derivative_unchecked(&self, alpha: usize, x: f64) -> f64 {
        if alpha == 0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Cosine { lower, width } => {
                let w = alpha as f64 * std::f64::consts::PI / width;
                -std::f64::consts::SQRT_2 * w * (w * (x - lower)).sin()
            }
            Repr::Hermite => {
                let mut out = vec![0.0; alpha + 1];
                hermite_values(x, &mut out);
                (alpha as f64).sqrt() * out[alpha - 1]
            }
            Repr::Fem(f) => f.raw_derivative(alpha - 1, x) * f.deriv_scale[alpha - 1],
        }
    }

    /// Writes `phi_0(x), ..., phi_{m}(x)` into `out` (length `m + 1 <= p_max + 1`).
    /// `x` must already be validated with [`Self::check_point`].
    pub fn fill_values(&self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.eigenvalues.len());
        match &self.repr {
            Repr::Hermite => hermite_values(x, out),
            Repr::Cosine { lower, width } => {
                let theta = std::f64::consts::PI * (x - lower) / width;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = if k == 0 { 1.0 } else { std::f64::consts::SQRT_2 * (k as f64 * theta).cos() };
                }
            }
            Repr::Fem(_) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.value_unchecked(k, x);
                }
            }
        }
    }

    /// Writes `phi'_0(x), ..., phi'_m(x)` into `out`; same contract as [`Self::fill_values`].
    pub fn fill_derivatives(&self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.eigenvalues.len());
        match &self.repr {
            Repr::Hermite => {
                let mut vals = vec![0.0; out.len()];
                hermite_values(x, &mut vals);
                for k in 0..out.len() {
                    out[k] = if k == 0 { 0.0 } else { (k as f64).sqrt() * vals[k - 1] };
                }
            }
            _ => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.derivative_unchecked(k, x);
                }
            }
        }
    }

    /// Values and derivatives of all basis functions on `points` equispaced
    /// nodes of the support (infinite supports are cut at +-6).
    pub fn sample_grid(&self, points: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (a, b) = self.marginal.support();
        let (a, b) = (a.max(-6.0), b.min(6.0));
        let m = points.max(2);
        let xs: Vec<f64> = (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect();
        let p = self.p_max() + 1;
        let mut vals = vec![Vec::with_capacity(m); p];
        let mut ders = vec![Vec::with_capacity(m); p];
        let mut vbuf = vec![0.0; p];
        let mut dbuf = vec![0.0; p];
        for &x in &xs {
            self.fill_values(x, &mut vbuf);
            self.fill_derivatives(x, &mut dbuf);
            for k in 0..p {
                vals[k].push(vbuf[k]);
                ders[k].push(dbuf[k]);
            }
        }
        (xs, vals, ders)
    }
}

/// Orthonormal Hermite polynomials `He_n / sqrt(n!)` for `n < out.len()`.
fn hermite_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}
