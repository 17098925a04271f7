//! Built-in test models: the dyke flood cost model and basis-span synthetic targets.

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::expansion::{Expansion, Provenance};
use crate::marginals::{Family, Marginal, StandardizationMap};

/// A scalar model with a gradient, in model units.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x{i}")).collect()
    }
}

pub const DYKE_NAMES: [&str; 8] = ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B"];

/// Flow rate, Strickler coefficient, downstream and upstream river levels,
/// dyke height, bank level, river length and river width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykeInputs {
    pub q: f64,
    pub ks: f64,
    pub zv: f64,
    pub zm: f64,
    pub hd: f64,
    pub cb: f64,
    pub l: f64,
    pub b: f64,
}

impl DykeInputs {
    pub fn from_slice(x: &[f64]) -> Self {
        Self { q: x[0], ks: x[1], zv: x[2], zm: x[3], hd: x[4], cb: x[5], l: x[6], b: x[7] }
    }

    pub fn to_array(self) -> [f64; 8] {
        [self.q, self.ks, self.zv, self.zm, self.hd, self.cb, self.l, self.b]
    }
}

/// Maximal annual overflow `S` in metres.
pub fn dyke_overflow(v: &DykeInputs) -> f64 {
    (v.q / (v.b * v.ks * ((v.zm - v.zv) / v.l).sqrt())).powf(0.6) + v.zv - v.hd - v.cb
}

/// Annual cost in million euros: flooding or maintenance, plus construction.
pub fn dyke_cost(v: &DykeInputs) -> f64 {
    let s = dyke_overflow(v);
    let flood = if s > 0.0 { 1.0 } else { 0.2 + 0.8 * (1.0 - (-1000.0 / s.powi(4)).exp()) };
    let construction = if v.hd <= 8.0 { 8.0 } else { v.hd } / 20.0;
    flood + construction
}

/// Input laws: truncated Gumbel flow, one-sided truncated Gaussian
/// roughness, uniform dyke height and symmetric triangular geometry.
pub fn dyke_marginals() -> Vec<Marginal> {
    let tri = |a: f64, b: f64| {
        Marginal::new(Family::Triangular { lower: a, mode: 0.5 * (a + b), upper: b }).expect("valid triangular")
    };
    vec![
        Marginal::with_bounds(Family::Gumbel { location: 1013.0, scale: 558.0 }, 500.0, 3000.0).expect("valid"),
        Marginal::with_bounds(Family::Gaussian { mean: 30.0, std: 8.0 }, 15.0, f64::INFINITY).expect("valid"),
        tri(49.0, 51.0),
        tri(54.0, 56.0),
        Marginal::new(Family::Uniform { lower: 7.0, upper: 9.0 }).expect("valid"),
        tri(55.0, 56.0),
        tri(4990.0, 5010.0),
        tri(295.0, 305.0),
    ]
}

/// First-order and total Sobol' indices of the dyke model from a large reference study.
pub const DYKE_REFERENCE: [(f64, f64); 8] = [
    (0.358, 0.483),
    (0.156, 0.252),
    (0.167, 0.223),
    (0.003, 0.008),
    (0.119, 0.177),
    (0.029, 0.040),
    (0.0, 0.0),
    (0.0, 0.0),
];

/// Dyke cost with central finite-difference gradients.
#[derive(Debug, Clone)]
pub struct Dyke {
    steps: [f64; 8],
}

impl Dyke {
    pub const DEFAULT_RELATIVE_STEP: f64 = 1e-6;

    /// Steps are `relative_step` times the length of each (truncated) support.
    pub fn new(relative_step: f64) -> Result<Self> {
        let mut steps = [0.0; 8];
        for (s, m) in steps.iter_mut().zip(dyke_marginals()) {
            let m = crate::marginals::truncate(&m)?;
            let (a, b) = m.support();
            *s = relative_step * (b - a);
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> [f64; 8] {
        self.steps
    }
}

impl Default for Dyke {
    fn default() -> Self {
        Self::new(Self::DEFAULT_RELATIVE_STEP).expect("dyke marginals are valid")
    }
}

/// Central differences of `f` with per-coordinate steps.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], steps: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    steps
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn dyke_gradient(x: &[f64], steps: &[f64; 8]) -> Vec<f64> {
    central_gradient(|p| dyke_cost(&DykeInputs::from_slice(p)), x, steps)
}

impl Model for Dyke {
    fn dim(&self) -> usize {
        8
    }

    fn value(&self, x: &[f64]) -> f64 {
        dyke_cost(&DykeInputs::from_slice(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        dyke_gradient(x, &self.steps)
    }

    fn names(&self) -> Vec<String> {
        DYKE_NAMES.iter().map(|s| s.to_string()).collect()
    }
}

/// `f = sum_alpha c_alpha Phi_alpha` with its exact gradient.
#[derive(Debug, Clone)]
pub struct SyntheticTarget {
    expansion: Expansion,
}

pub fn synthetic_target(basis: BasisSet, coefficients: Vec<f64>, maps: Vec<StandardizationMap>) -> Result<SyntheticTarget> {
    let expansion = Expansion::new(basis, coefficients, true, Provenance::PoinceLars, maps)?;
    Ok(SyntheticTarget { expansion })
}

impl SyntheticTarget {
    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        self.expansion.eval(x)
    }

    pub fn try_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let maps = self.expansion.maps();
        if x.len() != maps.len() {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, expected {}", x.len(), maps.len())));
        }
        let u: Vec<f64> = x.iter().zip(maps).map(|(v, m)| m.forward(*v)).collect();
        let grad = self.expansion.basis().eval_gradient(&u)?;
        let c = self.expansion.coefficients();
        Ok(grad
            .iter()
            .zip(maps)
            .map(|(row, m)| row.iter().zip(c).map(|(g, c)| g * c).sum::<f64>() / m.scale)
            .collect())
    }
}

impl Model for SyntheticTarget {
    fn dim(&self) -> usize {
        self.expansion.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).expect("point inside the support")
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.try_gradient(x).expect("point inside the support")
    }
}
