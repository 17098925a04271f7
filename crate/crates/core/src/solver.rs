//! Least squares, corrected leave-one-out error, hybrid LARS and degree adaptivity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two LOO values closer than this are treated as equal.
pub const LOO_TIE_TOLERANCE: f64 = 1e-12;

/// Leverages at or above `1 - LEVERAGE_SLACK` count as interpolation.
const LEVERAGE_SLACK: f64 = 1e-10;

/// Relative residual norm below which a new column is treated as dependent.
const DEPENDENCE_TOLERANCE: f64 = 1e-9;

/// Regression matrix, right-hand side and the position of the constant column, if any.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub psi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub constant: Option<usize>,
}

impl RegressionProblem {
    pub fn new(psi: DMatrix<f64>, y: DVector<f64>, constant: Option<usize>) -> Result<Self> {
        if psi.nrows() == 0 || psi.ncols() == 0 {
            return Err(Error::Empty("regression matrix".into()));
        }
        if psi.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "regression matrix has {} rows, right-hand side has {}",
                psi.nrows(),
                y.len()
            )));
        }
        if let Some(c) = constant {
            if c >= psi.ncols() {
                return Err(Error::MissingConstant);
            }
        }
        if psi.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { psi, y, constant })
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn p(&self) -> usize {
        self.psi.ncols()
    }

    /// LOO normalizer: the sample variance of `y` when a constant column is
    /// present, its mean square otherwise.
    pub fn normalizer(&self) -> f64 {
        let n = self.n() as f64;
        match self.constant {
            Some(_) => {
                let mean = self.y.mean();
                let ss: f64 = self.y.iter().map(|v| (v - mean) * (v - mean)).sum();
                if self.n() > 1 {
                    ss / (n - 1.0)
                } else {
                    0.0
                }
            }
            None => self.y.norm_squared() / n,
        }
    }

    pub fn default_max_active(&self) -> usize {
        (self.n().saturating_sub(1)).min(self.p())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// One entry per column; zero outside the active set.
    pub coefficients: Vec<f64>,
    /// Active columns in order of entry.
    pub active: Vec<usize>,
    /// Corrected, normalized leave-one-out error.
    pub loo: f64,
    pub p_star: Option<u32>,
}

impl FitResult {
    fn empty(p: usize) -> Self {
        Self { coefficients: vec![0.0; p], active: Vec::new(), loo: 0.0, p_star: None }
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }
}

/// Least-squares solution through a Householder QR factorization.
pub fn ols(psi: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = psi.shape();
    if n < p {
        return Err(Error::Singular);
    }
    let qr = psi.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * scale) {
        return Err(Error::Singular);
    }
    let qty = qr.q().tr_mul(y);
    r.solve_upper_triangular(&qty).ok_or(Error::Singular)
}

/// Chapelle correction `N / (N - P_a) * (1 + tr((Psi_a^T Psi_a)^-1))`.
pub fn chapelle_factor(n: usize, p_active: usize, trace_inv_gram: f64) -> f64 {
    if p_active >= n {
        return f64::INFINITY;
    }
    n as f64 / (n - p_active) as f64 * (1.0 + trace_inv_gram)
}

fn loo_from_parts(residuals: &[f64], leverages: &[f64], trace: f64, p_active: usize, normalizer: f64) -> f64 {
    let n = residuals.len();
    let mut sum = 0.0;
    for (r, h) in residuals.iter().zip(leverages) {
        if *h >= 1.0 - LEVERAGE_SLACK {
            return f64::INFINITY;
        }
        let e = r / (1.0 - h);
        sum += e * e;
    }
    let raw = sum / n as f64;
    if raw == 0.0 {
        return 0.0;
    }
    let factor = chapelle_factor(n, p_active, trace);
    if normalizer > 0.0 {
        raw / normalizer * factor
    } else {
        f64::INFINITY
    }
}

/// Corrected LOO error of the OLS fit on the `active` columns.
pub fn loo_corrected(problem: &RegressionProblem, active: &[usize]) -> Result<f64> {
    let mut qr = IncrementalQr::new(&problem.y);
    for &j in active {
        if !qr.push(problem.psi.column(j).as_slice()) {
            return Err(Error::Singular);
        }
    }
    Ok(qr.loo(problem.normalizer()))
}

/// Gram-Schmidt QR that grows one column at a time and tracks the OLS
/// residuals, leverages and `tr((A^T A)^-1)`.
struct IncrementalQr {
    n: usize,
    y: Vec<f64>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    qty: Vec<f64>,
    rinv: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    leverages: Vec<f64>,
    trace: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl IncrementalQr {
    fn new(y: &DVector<f64>) -> Self {
        let n = y.len();
        Self {
            n,
            y: y.as_slice().to_vec(),
            q: Vec::new(),
            r: Vec::new(),
            qty: Vec::new(),
            rinv: Vec::new(),
            residuals: y.as_slice().to_vec(),
            leverages: vec![0.0; n],
            trace: 0.0,
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Appends a column; returns `false` (leaving the state unchanged) if it
    /// is numerically dependent on the current ones.
    fn push(&mut self, col: &[f64]) -> bool {
        let k = self.len();
        let norm0 = dot(col, col).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut v = col.to_vec();
        let mut rcol = vec![0.0; k];
        for _ in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let c = dot(qj, &v);
                rcol[j] += c;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let rho = dot(&v, &v).sqrt();
        if rho <= DEPENDENCE_TOLERANCE * norm0 {
            return false;
        }
        for vi in &mut v {
            *vi /= rho;
        }
        // Inverse of [[R, r], [0, rho]] is [[R^-1, -R^-1 r / rho], [0, 1 / rho]].
        let mut new_col = vec![0.0; k + 1];
        for (i, row) in self.rinv.iter().enumerate() {
            new_col[i] = -dot(&row[i..k], &rcol[i..k]) / rho;
        }
        new_col[k] = 1.0 / rho;
        self.trace += new_col.iter().map(|v| v * v).sum::<f64>();
        for (i, row) in self.rinv.iter_mut().enumerate() {
            row.push(new_col[i]);
        }
        let mut last = vec![0.0; k + 1];
        last[k] = new_col[k];
        self.rinv.push(last);

        let c = dot(&v, &self.y);
        for i in 0..self.n {
            self.residuals[i] -= c * v[i];
            self.leverages[i] += v[i] * v[i];
        }
        rcol.push(rho);
        self.r.push(rcol);
        self.qty.push(c);
        self.q.push(v);
        true
    }

    fn coefficients(&self) -> Vec<f64> {
        // R^-1 Q^T y, with `rinv` stored row-wise.
        self.rinv.iter().enumerate().map(|(i, row)| dot(&row[i..], &self.qty[i..])).collect()
    }

    fn loo(&self, normalizer: f64) -> f64 {
        if self.len() == 0 {
            let ss: f64 = self.y.iter().map(|v| v * v).sum();
            return if ss == 0.0 { 0.0 } else { ss / self.n as f64 / normalizer };
        }
        loo_from_parts(&self.residuals, &self.leverages, self.trace, self.len(), normalizer)
    }
}

/// One step of the least-angle path on standardized columns.
#[derive(Debug, Clone)]
pub struct LarsStep {
    /// Column (original numbering) entering the active set.
    pub entered: usize,
    /// Current LARS coefficients on the standardized columns.
    pub beta: Vec<f64>,
}

/// Least-angle regression path with incremental Cholesky updates of the active Gram matrix.
pub struct LarsPath<'a> {
    problem: &'a RegressionProblem,
    x: DMatrix<f64>,
    scales: Vec<f64>,
    residual: DVector<f64>,
    corr: DVector<f64>,
    active: Vec<usize>,
    signs: Vec<f64>,
    usable: Vec<bool>,
    chol: Vec<Vec<f64>>,
    beta: Vec<f64>,
    c0: f64,
    done: bool,
}

impl<'a> LarsPath<'a> {
    pub fn new(problem: &'a RegressionProblem) -> Self {
        let (n, p) = problem.psi.shape();
        let mut x = problem.psi.clone();
        let mut scales = vec![0.0; p];
        let mut usable = vec![true; p];
        let centered = problem.constant.is_some();
        let mut residual = problem.y.clone();
        if centered {
            let m = residual.mean();
            residual.add_scalar_mut(-m);
        }
        for j in 0..p {
            let mut col = x.column_mut(j);
            let raw_norm = col.norm();
            if centered {
                let m = col.mean();
                col.add_scalar_mut(-m);
            }
            let norm = col.norm();
            if Some(j) == problem.constant || norm <= 1e-10 * raw_norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
                usable[j] = false;
                col.fill(0.0);
            } else {
                col /= norm;
                scales[j] = norm;
            }
        }
        let corr = x.tr_mul(&residual);
        let c0 = max_abs(&corr, &usable).map_or(0.0, |(_, c)| c);
        let _ = n;
        Self {
            problem,
            x,
            scales,
            residual,
            corr,
            active: Vec::new(),
            signs: Vec::new(),
            usable,
            chol: Vec::new(),
            beta: vec![0.0; p],
            c0,
            done: c0 == 0.0,
        }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Standardized column scales (zero for unusable columns).
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Correlations of the standardized columns with the current residual.
    pub fn correlations(&self) -> DVector<f64> {
        self.x.tr_mul(&self.residual)
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    /// Permanently drops a column from the candidate pool.
    pub fn exclude(&mut self, j: usize) {
        self.usable[j] = false;
    }

    /// Picks the most correlated inactive column, adds it, and advances
    /// along the equiangular direction.  Returns `None` at the end of the path.
    pub fn step(&mut self) -> Option<LarsStep> {
        loop {
            if self.done {
                return None;
            }
            let (j, cj) = match max_abs(&self.corr, &self.usable) {
                Some(v) => v,
                None => {
                    self.done = true;
                    return None;
                }
            };
            if cj <= 1e-12 * self.c0 {
                self.done = true;
                return None;
            }
            self.usable[j] = false;
            if !self.chol_push(j) {
                continue;
            }
            self.active.push(j);
            self.signs.push(self.corr[j].signum());
            self.advance(cj);
            return Some(LarsStep { entered: j, beta: self.beta.clone() });
        }
    }

    fn chol_push(&mut self, j: usize) -> bool {
        let xj = self.x.column(j);
        let k = self.active.len();
        let g: Vec<f64> = self.active.iter().map(|&a| self.x.column(a).dot(&xj)).collect();
        let mut l = vec![0.0; k];
        for i in 0..k {
            let s = g[i] - dot(&self.chol[i][..i], &l[..i]);
            l[i] = s / self.chol[i][i];
        }
        let d = 1.0 - dot(&l, &l);
        if d <= 1e-10 {
            return false;
        }
        l.push(d.sqrt());
        self.chol.push(l);
        true
    }

    fn solve_gram(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut z = vec![0.0; k];
        for i in 0..k {
            z[i] = (rhs[i] - dot(&self.chol[i][..i], &z[..i])) / self.chol[i][i];
        }
        let mut w = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for m in (i + 1)..k {
                s -= self.chol[m][i] * w[m];
            }
            w[i] = s / self.chol[i][i];
        }
        w
    }

    fn advance(&mut self, big_c: f64) {
        let w0 = self.solve_gram(&self.signs);
        let a_norm = 1.0 / dot(&self.signs, &w0).sqrt();
        let w: Vec<f64> = w0.iter().map(|v| v * a_norm).collect();
        let mut u = DVector::zeros(self.x.nrows());
        for (&j, &wj) in self.active.iter().zip(&w) {
            u.axpy(wj, &self.x.column(j), 1.0);
        }
        let a = self.x.tr_mul(&u);
        let mut gamma = big_c / a_norm;
        for j in 0..self.x.ncols() {
            if !self.usable[j] {
                continue;
            }
            for g in [(big_c - self.corr[j]) / (a_norm - a[j]), (big_c + self.corr[j]) / (a_norm + a[j])] {
                if g > 1e-14 * gamma && g < gamma {
                    gamma = g;
                }
            }
        }
        for (&j, &wj) in self.active.iter().zip(&w) {
            self.beta[j] += gamma * wj;
        }
        self.residual.axpy(-gamma, &u, 1.0);
        self.corr.axpy(-gamma, &a, 1.0);
        if self.active.len() % 25 == 0 {
            self.corr = self.x.tr_mul(&self.residual);
        }
    }

    pub fn problem(&self) -> &RegressionProblem {
        self.problem
    }
}

fn max_abs(v: &DVector<f64>, usable: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&c, &ok)) in v.iter().zip(usable).enumerate() {
        if ok && best.is_none_or(|(_, b)| c.abs() > b) {
            best = Some((j, c.abs()));
        }
    }
    best
}

/// Number of non-improving steps tolerated before the path is abandoned.
///
/// Short paths (up to 50 steps) always run to the end: on small
/// underdetermined designs the exact support often completes only after a
/// long plateau of the LOO error.
pub fn patience(max_active: usize) -> usize {
    50.max(max_active / 10)
}

/// LARS path with an OLS refit on every prefix; returns the prefix with the
/// smallest corrected LOO error (fewer terms on ties).
pub fn hybrid_lars(problem: &RegressionProblem, max_active: Option<usize>) -> Result<FitResult> {
    let p = problem.p();
    let cap = max_active.unwrap_or_else(|| problem.default_max_active()).min(problem.default_max_active());
    let normalizer = problem.normalizer();

    let mut qr = IncrementalQr::new(&problem.y);
    let mut active = Vec::new();
    if let Some(c) = problem.constant {
        if cap == 0 || !qr.push(problem.psi.column(c).as_slice()) {
            return Err(Error::Singular);
        }
        active.push(c);
    }
    if normalizer <= 0.0 {
        // Zero-variance data: the constant alone (or nothing) already interpolates.
        let mut fit = FitResult::empty(p);
        if let Some(c) = problem.constant {
            fit.coefficients[c] = qr.coefficients()[0];
            fit.active = vec![c];
        }
        return Ok(fit);
    }

    let mut best_loo = qr.loo(normalizer);
    let mut best_len = active.len();
    let mut best_coef = qr.coefficients();
    let mut stale = 0;
    let window = patience(cap);

    let mut path = LarsPath::new(problem);
    while active.len() < cap {
        let Some(step) = path.step() else { break };
        let j = step.entered;
        if !qr.push(problem.psi.column(j).as_slice()) {
            // Dependent in the uncentered basis; skip the candidate.
            continue;
        }
        active.push(j);
        let loo = qr.loo(normalizer);
        if loo < best_loo - LOO_TIE_TOLERANCE {
            best_loo = loo;
            best_len = active.len();
            best_coef = qr.coefficients();
            stale = 0;
        } else {
            stale += 1;
            if stale >= window {
                break;
            }
        }
    }

    let mut coefficients = vec![0.0; p];
    for (&j, &c) in active[..best_len].iter().zip(&best_coef) {
        coefficients[j] = c;
    }
    Ok(FitResult { coefficients, active: active[..best_len].to_vec(), loo: best_loo, p_star: None })
}

/// Per-degree outcome of [`degree_adaptive_fit`].
#[derive(Debug, Clone)]
pub struct AdaptiveFit<T> {
    pub p_star: u32,
    pub fit: FitResult,
    pub payload: T,
    /// `(p, loo)` for every degree that was fitted.
    pub history: Vec<(u32, f64)>,
}

/// Fits each degree in `p_range` (ascending) and keeps the smallest LOO,
/// stopping after two consecutive increases.
pub fn degree_adaptive_fit<T, F>(p_range: &[u32], mut fit_at: F) -> Result<AdaptiveFit<T>>
where
    F: FnMut(u32) -> Result<(FitResult, T)>,
{
    let mut degrees = p_range.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    if degrees.is_empty() {
        return Err(Error::Empty("degree range".into()));
    }
    let mut best: Option<(u32, FitResult, T)> = None;
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut rises = 0;
    for p in degrees {
        let (mut fit, payload) = fit_at(p)?;
        fit.p_star = Some(p);
        let loo = fit.loo;
        history.push((p, loo));
        let better = match &best {
            None => true,
            Some((_, b, _)) => loo < b.loo - LOO_TIE_TOLERANCE,
        };
        if better {
            best = Some((p, fit, payload));
        }
        if loo > prev {
            rises += 1;
            if rises >= 2 {
                break;
            }
        } else {
            rises = 0;
        }
        prev = loo;
    }
    let (p_star, fit, payload) = best.expect("at least one degree fitted");
    Ok(AdaptiveFit { p_star, fit, payload, history })
}
