//! Poincaré chaos expansions fitted from model evaluations or from partial derivatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{hyperbolic, total_degree, BasisSet, MultiIndex, Truncation};
use crate::error::{Error, Result};
use crate::marginals::{prepare, Marginal, PreparedInput, StandardizationMap};
use crate::poincare1d::{PoincareBasis1D, DEFAULT_GRID_N};
use crate::solver::{degree_adaptive_fit, hybrid_lars, RegressionProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    PoinceLars,
    PoinceDerLars { input: usize },
    PoinceDerAvg,
    PoinceMc,
    PoinceDerMc { input: usize },
}

/// Degree policy and solver cap shared by the regression-based fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Candidate total degrees; a single entry means a fixed degree.
    pub degrees: Vec<u32>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub max_active: Option<usize>,
}

fn default_q() -> f64 {
    1.0
}

impl FitConfig {
    pub fn adaptive(p_max: u32) -> Self {
        Self { degrees: (1..=p_max).collect(), q: 1.0, max_active: None }
    }

    pub fn fixed(p: u32) -> Self {
        Self { degrees: vec![p], q: 1.0, max_active: None }
    }

    pub fn p_max(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Input laws with their one-dimensional bases, built once and shared by every fit.
#[derive(Debug, Clone)]
pub struct InputSpace {
    prepared: Vec<PreparedInput>,
    bases: Vec<Arc<PoincareBasis1D>>,
    grid_n: usize,
}

impl InputSpace {
    pub fn new(marginals: &[Marginal], p_max: usize, grid_n: usize) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::Empty("input marginals".into()));
        }
        let prepared = marginals.iter().map(prepare).collect::<Result<Vec<_>>>()?;
        let mut bases: Vec<Arc<PoincareBasis1D>> = Vec::with_capacity(prepared.len());
        for p in &prepared {
            // Identical standard laws share one basis.
            let shared = prepared
                .iter()
                .zip(&bases)
                .find(|(q, _)| q.standard == p.standard)
                .map(|(_, b)| Arc::clone(b));
            bases.push(match shared {
                Some(b) => b,
                None => Arc::new(PoincareBasis1D::build(&p.standard, p_max, grid_n)?),
            });
        }
        Ok(Self { prepared, bases, grid_n })
    }

    pub fn with_default_grid(marginals: &[Marginal], p_max: usize) -> Result<Self> {
        Self::new(marginals, p_max, DEFAULT_GRID_N)
    }

    pub fn dim(&self) -> usize {
        self.prepared.len()
    }

    pub fn prepared(&self) -> &[PreparedInput] {
        &self.prepared
    }

    /// Marginals in model units, after truncation.
    pub fn model_marginals(&self) -> Vec<Marginal> {
        self.prepared.iter().map(|p| p.model).collect()
    }

    pub fn maps(&self) -> Vec<StandardizationMap> {
        self.prepared.iter().map(|p| p.map).collect()
    }

    pub fn bases(&self) -> &[Arc<PoincareBasis1D>] {
        &self.bases
    }

    pub fn p_max(&self) -> usize {
        self.bases.iter().map(|b| b.p_max()).min().unwrap_or(0)
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, expected {}", x.len(), self.dim())));
        }
        Ok(x.iter().zip(&self.prepared).map(|(v, p)| p.map.forward(*v)).collect())
    }

    pub fn standardize_all(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|x| self.standardize(x)).collect()
    }

    pub fn basis_set(&self, t: Truncation) -> Result<BasisSet> {
        if t.p as usize > self.p_max() {
            return Err(Error::OrderOutOfRange { order: t.p as usize, max: self.p_max() });
        }
        BasisSet::new(self.bases.clone(), t)
    }
}

/// Coefficients over a basis set, with how they were obtained.
#[derive(Debug, Clone)]
pub struct Expansion {
    basis: BasisSet,
    coefficients: Vec<f64>,
    /// `false` until a constant term has been fitted (derivative-based fits).
    has_constant: bool,
    provenance: Provenance,
    maps: Vec<StandardizationMap>,
    pub loo: Option<f64>,
    pub p_star: Option<u32>,
    pub n_active: usize,
}

impl Expansion {
    pub fn new(
        basis: BasisSet,
        coefficients: Vec<f64>,
        has_constant: bool,
        provenance: Provenance,
        maps: Vec<StandardizationMap>,
    ) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} basis terms",
                coefficients.len(),
                basis.len()
            )));
        }
        if maps.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!("{} maps for {} inputs", maps.len(), basis.dim())));
        }
        let n_active = coefficients.iter().filter(|c| **c != 0.0).count();
        Ok(Self { basis, coefficients, has_constant, provenance, maps, loo: None, p_star: None, n_active })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn maps(&self) -> &[StandardizationMap] {
        &self.maps
    }

    pub fn has_constant(&self) -> bool {
        self.has_constant
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Coefficient of `alpha`, zero when the index is outside the basis.
    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.basis.position(alpha).map_or(0.0, |k| self.coefficients[k])
    }

    pub fn constant(&self) -> f64 {
        self.coefficient(&MultiIndex::zero(self.dim()))
    }

    /// `(alpha, c_alpha)` over the basis, zeros included.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.basis.indices().iter().zip(self.coefficients.iter().copied())
    }

    /// Eigenvalue `lambda_{i, alpha_i}` of the input-`i` basis.
    pub fn eigenvalue(&self, i: usize, order: u32) -> f64 {
        self.basis.bases()[i].eigenvalues()[order as usize]
    }

    /// Surrogate value at a point in model units.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, expected {}", x.len(), self.dim())));
        }
        let u: Vec<f64> = x.iter().zip(&self.maps).map(|(v, m)| m.forward(*v)).collect();
        self.basis.eval_combination(&self.coefficients, &u)
    }

    /// Serializable description; the bases are rebuilt from the standard marginals.
    pub fn to_document(&self) -> ExpansionDocument {
        ExpansionDocument {
            standard_marginals: self.basis.bases().iter().map(|b| *b.marginal()).collect(),
            p_max: self.basis.bases().iter().map(|b| b.p_max()).min().unwrap_or(0),
            grid_n: self.basis.bases().iter().map(|b| b.grid_n()).max().unwrap_or(0),
            truncation: self.basis.truncation(),
            maps: self.maps.clone(),
            provenance: self.provenance,
            has_constant: self.has_constant,
            coefficients: self
                .terms()
                .filter(|(_, c)| *c != 0.0)
                .map(|(a, c)| CoefficientEntry { index: a.clone(), value: c })
                .collect(),
            loo: self.loo,
            p_star: self.p_star,
        }
    }

    pub fn from_document(doc: &ExpansionDocument) -> Result<Self> {
        let mut bases: Vec<Arc<PoincareBasis1D>> = Vec::new();
        for (i, m) in doc.standard_marginals.iter().enumerate() {
            let shared = doc.standard_marginals[..i].iter().position(|q| q == m).map(|k| Arc::clone(&bases[k]));
            bases.push(match shared {
                Some(b) => b,
                None => Arc::new(PoincareBasis1D::build(m, doc.p_max, doc.grid_n.max(2))?),
            });
        }
        let basis = BasisSet::new(bases, doc.truncation)?;
        let mut coefficients = vec![0.0; basis.len()];
        for e in &doc.coefficients {
            let k = basis
                .position(&e.index)
                .ok_or_else(|| Error::Parse(format!("multi-index {} is outside the truncation", e.index)))?;
            coefficients[k] = e.value;
        }
        let mut out = Self::new(basis, coefficients, doc.has_constant, doc.provenance, doc.maps.clone())?;
        out.loo = doc.loo;
        out.p_star = doc.p_star;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub index: MultiIndex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDocument {
    pub standard_marginals: Vec<Marginal>,
    pub p_max: usize,
    pub grid_n: usize,
    pub truncation: Truncation,
    pub maps: Vec<StandardizationMap>,
    pub provenance: Provenance,
    pub has_constant: bool,
    pub coefficients: Vec<CoefficientEntry>,
    pub loo: Option<f64>,
    pub p_star: Option<u32>,
}

fn indices_for(dim: usize, p: u32, q: f64) -> Result<Vec<MultiIndex>> {
    if q == 1.0 {
        Ok(total_degree(dim, p))
    } else {
        hyperbolic(dim, p, q)
    }
}

fn check_config(space: &InputSpace, config: &FitConfig) -> Result<()> {
    if config.degrees.is_empty() {
        return Err(Error::Empty("degree range".into()));
    }
    if config.p_max() as usize > space.p_max() {
        return Err(Error::OrderOutOfRange { order: config.p_max() as usize, max: space.p_max() });
    }
    Ok(())
}

fn check_data(points: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("experimental design".into()));
    }
    if points.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} points but {} responses", points.len(), y.len())));
    }
    Ok(())
}

fn finish(
    space: &InputSpace,
    indices: Vec<MultiIndex>,
    t: Truncation,
    coefficients: Vec<f64>,
    has_constant: bool,
    provenance: Provenance,
) -> Result<Expansion> {
    let basis = BasisSet::from_indices(space.bases().to_vec(), indices, t)?;
    Expansion::new(basis, coefficients, has_constant, provenance, space.maps())
}

/// Sparse regression of model evaluations on the basis, with degree adaptivity.
pub fn fit_poince(space: &InputSpace, points: &[Vec<f64>], y: &[f64], config: &FitConfig) -> Result<Expansion> {
    check_config(space, config)?;
    check_data(points, y)?;
    let u = space.standardize_all(points)?;
    let full = space.basis_set(Truncation { p: config.p_max(), q: config.q })?;
    let psi = full.matrix(&u)?;
    let yv = DVector::from_column_slice(y);

    let adaptive = degree_adaptive_fit(&config.degrees, |p| {
        let indices = indices_for(space.dim(), p, config.q)?;
        let cols: Vec<usize> = indices.iter().map(|a| full.position(a).expect("nested truncation")).collect();
        let problem = RegressionProblem::new(psi.select_columns(&cols), yv.clone(), Some(0))?;
        Ok((hybrid_lars(&problem, config.max_active)?, indices))
    })?;
    let mut exp = finish(
        space,
        adaptive.payload,
        Truncation { p: adaptive.p_star, q: config.q },
        adaptive.fit.coefficients.clone(),
        true,
        Provenance::PoinceLars,
    )?;
    exp.loo = Some(adaptive.fit.loo);
    exp.p_star = Some(adaptive.p_star);
    exp.n_active = adaptive.fit.n_active();
    Ok(exp)
}

/// Sparse regression of the `i`-th partial derivative (model units) on the
/// normalized derivative basis.  Coefficients are returned in the same
/// normalization as [`fit_poince`], and the constant term stays unknown.
pub fn fit_poince_der(
    space: &InputSpace,
    points: &[Vec<f64>],
    dy: &[f64],
    i: usize,
    config: &FitConfig,
) -> Result<Expansion> {
    check_config(space, config)?;
    check_data(points, dy)?;
    if i >= space.dim() {
        return Err(Error::InputOutOfRange { index: i, dim: space.dim() });
    }
    let u = space.standardize_all(points)?;
    let scale = space.prepared()[i].map.scale;
    let yv = DVector::from_iterator(dy.len(), dy.iter().map(|v| v * scale));
    let full = space.basis_set(Truncation { p: config.p_max(), q: config.q })?;
    let (psi, positions) = full.deriv_matrix(i, &u)?;
    let sqrt_lambda: Vec<f64> = space.bases()[i].eigenvalues().iter().map(|l| l.sqrt()).collect();

    let adaptive = degree_adaptive_fit(&config.degrees, |p| {
        let indices = indices_for(space.dim(), p, config.q)?;
        // Derivative columns of this degree, and where they sit in `indices`.
        let mut cols = Vec::new();
        let mut slots = Vec::new();
        for (slot, a) in indices.iter().enumerate() {
            if a.get(i) >= 1 {
                let k = full.position(a).expect("nested truncation");
                cols.push(positions.binary_search(&k).expect("derivative column"));
                slots.push(slot);
            }
        }
        let mut coefficients = vec![0.0; indices.len()];
        if cols.is_empty() {
            return Ok((crate::solver::FitResult { coefficients, active: vec![], loo: 0.0, p_star: None }, indices));
        }
        let problem = RegressionProblem::new(psi.select_columns(&cols), yv.clone(), None)?;
        let mut fit = hybrid_lars(&problem, config.max_active)?;
        for (c, &slot) in fit.coefficients.iter().zip(&slots) {
            coefficients[slot] = c / sqrt_lambda[indices[slot].get(i) as usize];
        }
        fit.active = fit.active.iter().map(|&k| slots[k]).collect();
        fit.coefficients = coefficients;
        Ok((fit, indices))
    })?;
    let mut exp = finish(
        space,
        adaptive.payload,
        Truncation { p: adaptive.p_star, q: config.q },
        adaptive.fit.coefficients.clone(),
        false,
        Provenance::PoinceDerLars { input: i },
    )?;
    exp.loo = Some(adaptive.fit.loo);
    exp.p_star = Some(adaptive.p_star);
    exp.n_active = adaptive.fit.n_active();
    Ok(exp)
}

/// Averages per-input derivative expansions: each non-constant coefficient
/// is the mean over the inputs it depends on, restricted to the expansions
/// whose basis contains it.  The result lives on the largest of the bases
/// and has no constant term yet.
pub fn average_der_expansions(expansions: &[Expansion]) -> Result<Expansion> {
    let first = expansions.first().ok_or_else(|| Error::Empty("derivative expansions".into()))?;
    let d = first.dim();
    let q = first.basis().truncation().q;
    for e in expansions {
        let same_bases = e.basis().bases().iter().zip(first.basis().bases()).all(|(a, b)| {
            let n = a.eigenvalues().len().min(b.eigenvalues().len());
            a.eigenvalues()[..n] == b.eigenvalues()[..n]
        });
        if e.dim() != d || e.basis().truncation().q != q || e.maps() != first.maps() || !same_bases {
            return Err(Error::DimensionMismatch("derivative expansions do not share an input space".into()));
        }
    }
    let union = expansions
        .iter()
        .max_by_key(|e| e.basis().truncation().p)
        .expect("nonempty")
        .basis()
        .clone();
    let mut coefficients = vec![0.0; union.len()];
    for (k, alpha) in union.indices().iter().enumerate() {
        if alpha.is_zero() {
            continue;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for e in expansions {
            let (Provenance::PoinceDerLars { input } | Provenance::PoinceDerMc { input }) = e.provenance() else {
                return Err(Error::DimensionMismatch("only derivative expansions can be averaged".into()));
            };
            if alpha.get(input) >= 1 && e.basis().position(alpha).is_some() {
                sum += e.coefficient(alpha);
                count += 1;
            }
        }
        if count > 0 {
            coefficients[k] = sum / count as f64;
        }
    }
    let mut out = Expansion::new(union, coefficients, false, Provenance::PoinceDerAvg, first.maps().to_vec())?;
    out.p_star = Some(out.basis().truncation().p);
    Ok(out)
}

/// Sets `c_0` to the mean residual of the non-constant part.
pub fn fit_constant_residual(expansion: &Expansion, points: &[Vec<f64>], y: &[f64]) -> Result<Expansion> {
    check_data(points, y)?;
    let zero = MultiIndex::zero(expansion.dim());
    let k0 = expansion
        .basis()
        .position(&zero)
        .ok_or(Error::MissingConstant)?;
    let mut coefficients = expansion.coefficients().to_vec();
    coefficients[k0] = 0.0;
    let mut sum = 0.0;
    for (x, v) in points.iter().zip(y) {
        let u: Vec<f64> = x.iter().zip(expansion.maps()).map(|(a, m)| m.forward(*a)).collect();
        sum += v - expansion.basis().eval_combination(&coefficients, &u)?;
    }
    coefficients[k0] = sum / y.len() as f64;
    let mut out = expansion.clone();
    out.coefficients = coefficients;
    out.has_constant = true;
    out.n_active = out.coefficients.iter().filter(|c| **c != 0.0).count();
    Ok(out)
}

/// Monte Carlo projection `c_alpha = mean(y Phi_alpha)` on the total-degree-`p` basis.
pub fn fit_projection_mc(space: &InputSpace, points: &[Vec<f64>], y: &[f64], p: u32) -> Result<Expansion> {
    check_data(points, y)?;
    let basis = space.basis_set(Truncation::total_degree(p))?;
    let u = space.standardize_all(points)?;
    let psi = basis.matrix(&u)?;
    let coefficients = project(&psi, y);
    Expansion::new(basis, coefficients, true, Provenance::PoinceMc, space.maps())
}

/// Monte Carlo projection of the `i`-th partial derivative on the normalized
/// derivative basis, rescaled to the [`fit_projection_mc`] normalization.
pub fn fit_projection_mc_der(
    space: &InputSpace,
    points: &[Vec<f64>],
    dy: &[f64],
    i: usize,
    p: u32,
) -> Result<Expansion> {
    check_data(points, dy)?;
    if i >= space.dim() {
        return Err(Error::InputOutOfRange { index: i, dim: space.dim() });
    }
    let basis = space.basis_set(Truncation::total_degree(p))?;
    let u = space.standardize_all(points)?;
    let scale = space.prepared()[i].map.scale;
    let scaled: Vec<f64> = dy.iter().map(|v| v * scale).collect();
    let (psi, positions) = basis.deriv_matrix(i, &u)?;
    let b = project(&psi, &scaled);
    let mut coefficients = vec![0.0; basis.len()];
    for (bk, &k) in b.iter().zip(&positions) {
        let order = basis.indices()[k].get(i) as usize;
        coefficients[k] = bk / space.bases()[i].eigenvalues()[order].sqrt();
    }
    Expansion::new(basis, coefficients, false, Provenance::PoinceDerMc { input: i }, space.maps())
}

fn project(psi: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let yv = DVector::from_column_slice(y);
    (psi.tr_mul(&yv) / y.len() as f64).as_slice().to_vec()
}

/// Surrogate value at a point in model units.
pub fn eval_surrogate(expansion: &Expansion, x: &[f64]) -> Result<f64> {
    expansion.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{lhs_maximin, mc_sample};
    use crate::marginals::Family;
    use crate::models::{synthetic_target, Model};

    fn uniform(a: f64, b: f64) -> Marginal {
        Marginal::new(Family::Uniform { lower: a, upper: b }).unwrap()
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn space2() -> InputSpace {
        InputSpace::new(&[uniform(0.0, 1.0), uniform(-2.0, 4.0)], 5, 200).unwrap()
    }

    fn target(space: &InputSpace, p: u32, terms: &[(&[u32], f64)]) -> crate::models::SyntheticTarget {
        let basis = space.basis_set(Truncation::total_degree(p)).unwrap();
        let mut c = vec![0.0; basis.len()];
        for (a, v) in terms {
            c[basis.position(&mi(a)).unwrap()] = *v;
        }
        synthetic_target(basis, c, space.maps()).unwrap()
    }

    fn evaluate(t: &dyn Model, points: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let y = points.iter().map(|x| t.value(x)).collect();
        let g = points.iter().map(|x| t.gradient(x)).collect();
        (y, g)
    }

    #[test]
    fn poince_recovers_constructed_target() {
        let space = space2();
        let f = target(&space, 3, &[(&[0, 0], 2.0), (&[1, 0], 3.0)]);
        let d = lhs_maximin(&space.model_marginals(), 50, 1, 10);
        let (y, _) = evaluate(&f, &d.points);
        let e = fit_poince(&space, &d.points, &y, &FitConfig::adaptive(3)).unwrap();
        assert!((e.coefficient(&mi(&[0, 0])) - 2.0).abs() < 1e-8);
        assert!((e.coefficient(&mi(&[1, 0])) - 3.0).abs() < 1e-8);
        for x in &d.points {
            assert!((e.eval(x).unwrap() - f.value(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn poince_constant_model() {
        let space = space2();
        let d = lhs_maximin(&space.model_marginals(), 20, 2, 5);
        let y = vec![-1.5; 20];
        let e = fit_poince(&space, &d.points, &y, &FitConfig::adaptive(3)).unwrap();
        assert_eq!(e.p_star, Some(1));
        assert!((e.constant() + 1.5).abs() < 1e-12);
        assert!(e.terms().filter(|(a, _)| !a.is_zero()).all(|(_, c)| c == 0.0));
    }

    #[test]
    fn derivative_fit_matches_value_fit() {
        let space = space2();
        let terms: &[(&[u32], f64)] = &[(&[0, 0], 1.0), (&[1, 0], 0.7), (&[2, 1], -0.4), (&[0, 3], 0.25), (&[1, 1], 0.5)];
        let f = target(&space, 3, terms);
        let d = lhs_maximin(&space.model_marginals(), 60, 3, 10);
        let (y, g) = evaluate(&f, &d.points);
        let cfg = FitConfig::adaptive(3);
        let value_fit = fit_poince(&space, &d.points, &y, &cfg).unwrap();
        for i in 0..2 {
            let dy: Vec<f64> = g.iter().map(|v| v[i]).collect();
            let der = fit_poince_der(&space, &d.points, &dy, i, &cfg).unwrap();
            assert_eq!(der.provenance(), Provenance::PoinceDerLars { input: i });
            for (a, c) in der.terms() {
                if a.get(i) >= 1 {
                    assert!((c - value_fit.coefficient(a)).abs() < 1e-6, "i={i} {a}: {c}");
                } else {
                    assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn derivative_fit_of_single_term_and_inactive_input() {
        let space = space2();
        let f = target(&space, 3, &[(&[2, 1], 1.0)]);
        let d = lhs_maximin(&space.model_marginals(), 40, 4, 10);
        let (_, g) = evaluate(&f, &d.points);
        let dy: Vec<f64> = g.iter().map(|v| v[0]).collect();
        let e = fit_poince_der(&space, &d.points, &dy, 0, &FitConfig::adaptive(3)).unwrap();
        assert!((e.coefficient(&mi(&[2, 1])) - 1.0).abs() < 1e-8);

        let g = target(&space, 3, &[(&[0, 2], 1.0)]);
        let (_, grad) = evaluate(&g, &d.points);
        let dy: Vec<f64> = grad.iter().map(|v| v[0]).collect();
        let e = fit_poince_der(&space, &d.points, &dy, 0, &FitConfig::adaptive(3)).unwrap();
        assert!(e.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn averaging_rules() {
        let space = InputSpace::new(&[uniform(0.0, 1.0); 3], 3, 50).unwrap();
        let basis = space.basis_set(Truncation::total_degree(2)).unwrap();
        let mk = |i: usize, vals: &[(&[u32], f64)], b: &BasisSet| {
            let mut c = vec![0.0; b.len()];
            for (a, v) in vals {
                c[b.position(&mi(a)).unwrap()] = *v;
            }
            Expansion::new(b.clone(), c, false, Provenance::PoinceDerLars { input: i }, space.maps()).unwrap()
        };
        let e0 = mk(0, &[(&[1, 1, 0], 2.0), (&[1, 0, 0], 5.0)], &basis);
        let e1 = mk(1, &[(&[1, 1, 0], 4.0), (&[0, 1, 1], 1.0)], &basis);
        let e2 = mk(2, &[(&[0, 1, 1], 1.0), (&[1, 1, 0], 100.0)], &basis);
        let avg = average_der_expansions(&[e0, e1, e2]).unwrap();
        assert_eq!(avg.coefficient(&mi(&[1, 1, 0])), 3.0);
        assert_eq!(avg.coefficient(&mi(&[1, 0, 0])), 5.0);
        assert_eq!(avg.coefficient(&mi(&[0, 1, 1])), 1.0);
        assert!(!avg.has_constant());

        // An index outside a smaller basis only averages over the bases that hold it.
        let small = space.basis_set(Truncation::total_degree(1)).unwrap();
        let big = space.basis_set(Truncation::total_degree(3)).unwrap();
        let a0 = mk(0, &[(&[2, 1, 0], 6.0)], &big);
        let a1 = mk(1, &[(&[0, 1, 0], 1.0)], &small);
        let avg = average_der_expansions(&[a0, a1]).unwrap();
        assert_eq!(avg.basis().truncation().p, 3);
        assert_eq!(avg.coefficient(&mi(&[2, 1, 0])), 6.0);
        assert_eq!(avg.coefficient(&mi(&[0, 1, 0])), 1.0);
        assert!(average_der_expansions(&[]).is_err());
    }

    #[test]
    fn constant_from_residual() {
        let space = space2();
        let f = target(&space, 2, &[(&[0, 0], 5.0), (&[1, 0], 1.0)]);
        let d = lhs_maximin(&space.model_marginals(), 30, 5, 5);
        let (y, _) = evaluate(&f, &d.points);
        let mut c = vec![0.0; f.expansion().basis().len()];
        c[f.expansion().basis().position(&mi(&[1, 0])).unwrap()] = 1.0;
        let partial = Expansion::new(f.expansion().basis().clone(), c.clone(), false, Provenance::PoinceDerAvg, space.maps()).unwrap();
        let e = fit_constant_residual(&partial, &d.points, &y).unwrap();
        assert!((e.constant() - 5.0).abs() < 1e-12);
        assert!(e.has_constant());

        let zero = Expansion::new(f.expansion().basis().clone(), vec![0.0; c.len()], false, Provenance::PoinceDerAvg, space.maps()).unwrap();
        let e = fit_constant_residual(&zero, &d.points, &y).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((e.constant() - mean).abs() < 1e-12);
    }

    #[test]
    fn projection_converges() {
        let space = space2();
        let f = target(&space, 2, &[(&[1, 1], 1.0)]);
        let n = 100_000;
        let d = mc_sample(&space.model_marginals(), n, 6);
        let (y, g) = evaluate(&f, &d.points);
        let e = fit_projection_mc(&space, &d.points, &y, 2).unwrap();
        // Each estimate has standard deviation sqrt(Var(Phi_a Phi_b) / N) <= 2 / sqrt(N) here.
        let tol = 3.0 * 2.0 / (n as f64).sqrt();
        for (a, c) in e.terms() {
            let expect = if a == &mi(&[1, 1]) { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < tol, "{a}: {c}");
        }
        let dy: Vec<f64> = g.iter().map(|v| v[1]).collect();
        let e = fit_projection_mc_der(&space, &d.points, &dy, 1, 2).unwrap();
        assert!((e.coefficient(&mi(&[1, 1])) - 1.0).abs() < tol);

        let constant = fit_projection_mc(&space, &d.points[..10], &[3.0; 10], 2).unwrap();
        assert_eq!(constant.constant(), 3.0);
    }

    #[test]
    fn standardization_invariance() {
        // The same law written in two unit systems gives the same surrogate.
        let a = InputSpace::new(&[uniform(0.0, 1.0), uniform(-2.0, 4.0)], 4, 50).unwrap();
        let b = InputSpace::new(&[uniform(0.0, 1000.0), uniform(-2.0, 4.0)], 4, 50).unwrap();
        let f = target(&a, 3, &[(&[0, 0], 1.0), (&[2, 1], 0.5), (&[1, 0], -1.0)]);
        let da = lhs_maximin(&a.model_marginals(), 40, 8, 5);
        let db: Vec<Vec<f64>> = da.points.iter().map(|x| vec![1000.0 * x[0], x[1]]).collect();
        let (y, g) = evaluate(&f, &da.points);
        let cfg = FitConfig::adaptive(3);
        let ea = fit_poince(&a, &da.points, &y, &cfg).unwrap();
        let eb = fit_poince(&b, &db, &y, &cfg).unwrap();
        for (x, xb) in da.points.iter().zip(&db) {
            assert!((ea.eval(x).unwrap() - eb.eval(xb).unwrap()).abs() < 1e-10);
        }
        let dya: Vec<f64> = g.iter().map(|v| v[0]).collect();
        let dyb: Vec<f64> = dya.iter().map(|v| v / 1000.0).collect();
        let ca = fit_poince_der(&a, &da.points, &dya, 0, &cfg).unwrap();
        let cb = fit_poince_der(&b, &db, &dyb, 0, &cfg).unwrap();
        for ((_, u), (_, v)) in ca.terms().zip(cb.terms()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn surrogate_evaluation_and_document_round_trip() {
        let raw = Marginal::with_bounds(Family::Gumbel { location: 1013.0, scale: 558.0 }, 500.0, 3000.0).unwrap();
        let space = InputSpace::new(&[raw, uniform(7.0, 9.0)], 3, 300).unwrap();
        let basis = space.basis_set(Truncation::total_degree(3)).unwrap();
        let mut c = vec![0.0; basis.len()];
        c[0] = 7.0;
        let flat = Expansion::new(basis.clone(), c.clone(), true, Provenance::PoinceLars, space.maps()).unwrap();
        assert_eq!(eval_surrogate(&flat, &[900.0, 8.1]).unwrap(), 7.0);
        assert!(eval_surrogate(&flat, &[100.0, 8.1]).is_err());

        let k = basis.position(&mi(&[2, 1])).unwrap();
        c[0] = 0.0;
        c[k] = -1.25;
        let single = Expansion::new(basis.clone(), c, true, Provenance::PoinceLars, space.maps()).unwrap();
        let x = [1700.0, 7.4];
        let u = space.standardize(&x).unwrap();
        let expect = -1.25 * space.bases()[0].eval(2, u[0]).unwrap() * space.bases()[1].eval(1, u[1]).unwrap();
        assert!((single.eval(&x).unwrap() - expect).abs() < 1e-14);

        let json = serde_json::to_string(&single.to_document()).unwrap();
        let back = Expansion::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.coefficients(), single.coefficients());
        assert_eq!(back.provenance(), Provenance::PoinceLars);
        assert!((back.eval(&x).unwrap() - single.eval(&x).unwrap()).abs() < 1e-12);
    }
}
