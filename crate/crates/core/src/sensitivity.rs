//! Sobol' indices, derivative-based measures and surrogate error from expansion coefficients.

use serde::{Deserialize, Serialize};

use crate::design::mc_sample;
use crate::error::{Error, Result};
use crate::expansion::Expansion;
use crate::marginals::Marginal;
use crate::models::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceSource {
    Coefficients,
    Empirical,
}

/// Coefficient sums attached to one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputPartials {
    pub d1: f64,
    pub dtot: f64,
    /// In model units.
    pub dgsm: f64,
    pub dgsm_ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputIndices {
    pub d1: f64,
    pub dtot: f64,
    pub s1: f64,
    pub stot: f64,
    pub dgsm: f64,
    pub dgsm_ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub d: f64,
    pub source: VarianceSource,
    pub inputs: Vec<InputIndices>,
}

/// `D = sum_{alpha != 0} c_alpha^2`.
pub fn total_variance(e: &Expansion) -> f64 {
    e.terms().filter(|(a, _)| !a.is_zero()).map(|(_, c)| c * c).sum()
}

/// `(D_i^1, D_i^tot)`: squared coefficients of the terms in `x_i` alone, and of all terms in `x_i`.
pub fn partial_variances(e: &Expansion, i: usize) -> (f64, f64) {
    let mut first = 0.0;
    let mut total = 0.0;
    for (a, c) in e.terms() {
        if a.get(i) >= 1 {
            total += c * c;
            if a.interaction_order() == 1 {
                first += c * c;
            }
        }
    }
    (first, total)
}

/// `nu_i = sum_{alpha_i >= 1} lambda_{i, alpha_i} c_alpha^2`, converted to model units.
pub fn dgsm_from_coefficients(e: &Expansion, i: usize) -> f64 {
    let scale = e.maps()[i].scale;
    let standard: f64 = e
        .terms()
        .filter(|(a, _)| a.get(i) >= 1)
        .map(|(a, c)| e.eigenvalue(i, a.get(i)) * c * c)
        .sum();
    standard / (scale * scale)
}

/// `C_P(mu_i) nu_i = sum_{alpha_i >= 1} (lambda_{i, alpha_i} / lambda_{i, 1}) c_alpha^2`.
pub fn dgsm_upper_bound(e: &Expansion, i: usize) -> Result<f64> {
    let eig = e.basis().bases()[i].eigenvalues();
    let l1 = *eig
        .get(1)
        .ok_or_else(|| Error::Spectral(format!("input {i} has no first eigenvalue")))?;
    // Each ratio is at least one, so the bound dominates D_i^tot term by term.
    Ok(e
        .terms()
        .filter(|(a, _)| a.get(i) >= 1)
        .map(|(a, c)| (eig[a.get(i) as usize] / l1).max(1.0) * c * c)
        .sum())
}

pub fn input_partials(e: &Expansion, i: usize) -> Result<InputPartials> {
    if i >= e.dim() {
        return Err(Error::InputOutOfRange { index: i, dim: e.dim() });
    }
    let (d1, dtot) = partial_variances(e, i);
    Ok(InputPartials { d1, dtot, dgsm: dgsm_from_coefficients(e, i), dgsm_ub: dgsm_upper_bound(e, i)? })
}

/// Divides the partial variances by `d`.
pub fn normalize_report(partials: &[InputPartials], d: f64, source: VarianceSource) -> Result<SensitivityReport> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveVariance(d));
    }
    let inputs = partials
        .iter()
        .map(|p| InputIndices {
            d1: p.d1,
            dtot: p.dtot,
            s1: p.d1 / d,
            stot: p.dtot / d,
            dgsm: p.dgsm,
            dgsm_ub: p.dgsm_ub,
        })
        .collect();
    Ok(SensitivityReport { d, source, inputs })
}

/// Every quantity from a single coefficient expansion.
pub fn coefficient_report(e: &Expansion) -> Result<SensitivityReport> {
    let partials = (0..e.dim()).map(|i| input_partials(e, i)).collect::<Result<Vec<_>>>()?;
    normalize_report(&partials, total_variance(e), VarianceSource::Coefficients)
}

pub fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Monte Carlo estimates of `E[(df/dx_i)^2]` for every input.
pub fn dgsm_mc_all(model: &dyn Model, marginals: &[Marginal], n: usize, seed: u64) -> Vec<f64> {
    let design = mc_sample(marginals, n, seed);
    let mut acc = vec![0.0; marginals.len()];
    for x in &design.points {
        for (a, g) in acc.iter_mut().zip(model.gradient(x)) {
            *a += g * g;
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

pub fn dgsm_mc_reference(model: &dyn Model, marginals: &[Marginal], n: usize, seed: u64, i: usize) -> Result<f64> {
    if i >= marginals.len() {
        return Err(Error::InputOutOfRange { index: i, dim: marginals.len() });
    }
    Ok(dgsm_mc_all(model, marginals, n, seed)[i])
}

/// `mean((f - f_surr)^2) / Var(f)` over paired values.
pub fn relmse_from_values(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference values and {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let var = sample_variance(truth);
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(var));
    }
    let mse = truth.iter().zip(predicted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
    Ok(mse / var)
}

/// RelMSE of a surrogate on an independent Monte Carlo validation sample.
pub fn relmse(
    surrogate: impl Fn(&[f64]) -> Result<f64>,
    model: &dyn Model,
    marginals: &[Marginal],
    n_val: usize,
    seed: u64,
) -> Result<f64> {
    let design = mc_sample(marginals, n_val, seed);
    let truth: Vec<f64> = design.points.iter().map(|x| model.value(x)).collect();
    let pred = design.points.iter().map(|x| surrogate(x)).collect::<Result<Vec<_>>>()?;
    relmse_from_values(&truth, &pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSet, MultiIndex, Truncation};
    use crate::expansion::{fit_poince_der, FitConfig, InputSpace, Provenance};
    use crate::marginals::{Family, StandardizationMap};
    use crate::models::synthetic_target;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn uniform(a: f64, b: f64) -> Marginal {
        Marginal::new(Family::Uniform { lower: a, upper: b }).unwrap()
    }

    fn expansion(space: &InputSpace, p: u32, terms: &[(&[u32], f64)]) -> Expansion {
        let basis = space.basis_set(Truncation::total_degree(p)).unwrap();
        let mut c = vec![0.0; basis.len()];
        for (a, v) in terms {
            c[basis.position(&mi(a)).unwrap()] = *v;
        }
        Expansion::new(basis, c, true, Provenance::PoinceLars, space.maps()).unwrap()
    }

    fn unit_space(d: usize) -> InputSpace {
        InputSpace::new(&vec![uniform(-0.5, 0.5); d], 4, 10).unwrap()
    }

    #[test]
    fn variance_examples() {
        let s = unit_space(3);
        assert_eq!(total_variance(&expansion(&s, 2, &[(&[0, 0, 0], 7.0)])), 0.0);
        assert_eq!(total_variance(&expansion(&s, 2, &[(&[0, 1, 0], 1.0)])), 1.0);

        let e = expansion(&s, 3, &[(&[2, 0, 0], 1.5)]);
        assert_eq!(partial_variances(&e, 0), (2.25, 2.25));
        assert_eq!(partial_variances(&e, 1), (0.0, 0.0));

        let e = expansion(&s, 3, &[(&[1, 1, 0], 2.0)]);
        assert_eq!(partial_variances(&e, 0), (0.0, 4.0));
    }

    #[test]
    fn dgsm_examples() {
        let s = unit_space(2);
        let e = expansion(&s, 3, &[(&[1, 0], 1.0)]);
        let l1 = std::f64::consts::PI.powi(2);
        assert!((dgsm_from_coefficients(&e, 0) - l1).abs() < 1e-12);
        assert_eq!(dgsm_from_coefficients(&e, 1), 0.0);
        assert_eq!(dgsm_upper_bound(&e, 0).unwrap(), partial_variances(&e, 0).1);

        let e = expansion(&s, 3, &[(&[2, 1], 0.5)]);
        assert!((dgsm_upper_bound(&e, 0).unwrap() - 4.0 * 0.25).abs() < 1e-12);

        // Model units: on [0, 10] the first eigenvalue is (pi / 10)^2.
        let wide = InputSpace::new(&[uniform(0.0, 10.0)], 2, 10).unwrap();
        let e = expansion(&wide, 2, &[(&[1], 1.0)]);
        assert!((dgsm_from_coefficients(&e, 0) - l1 / 100.0).abs() < 1e-12);

        let no_l1 = InputSpace::new(&[uniform(0.0, 1.0)], 0, 10).unwrap();
        let e = Expansion::new(
            no_l1.basis_set(Truncation::total_degree(0)).unwrap(),
            vec![1.0],
            true,
            Provenance::PoinceLars,
            no_l1.maps(),
        )
        .unwrap();
        assert!(matches!(dgsm_upper_bound(&e, 0), Err(Error::Spectral(_))));
    }

    #[test]
    fn hermite_dgsm_is_degree_weighted() {
        let g = Marginal::new(Family::Gaussian { mean: 0.0, std: 1.0 }).unwrap();
        let s = InputSpace::new(&[g, g], 4, 0).unwrap();
        let e = expansion(&s, 4, &[(&[1, 0], 0.3), (&[3, 1], -0.2), (&[0, 2], 0.7), (&[2, 2], 0.1)]);
        let expect0 = 1.0 * 0.09 + 3.0 * 0.04 + 2.0 * 0.01;
        assert!((dgsm_from_coefficients(&e, 0) - expect0).abs() < 1e-14);
        // Symbolic derivative of sum c h_a(x) h_b(y): h_n' = sqrt(n) h_{n-1}; the
        // squared derivative integrates to the same sum by orthonormality.
        let expect1 = 1.0 * 0.04 + 2.0 * 0.49 + 2.0 * 0.01;
        assert!((dgsm_from_coefficients(&e, 1) - expect1).abs() < 1e-14);
    }

    #[test]
    fn normalization() {
        let p = InputPartials { d1: 0.5, dtot: 2.0, dgsm: 1.0, dgsm_ub: 3.0 };
        let r = normalize_report(&[p], 2.0, VarianceSource::Coefficients).unwrap();
        assert_eq!(r.inputs[0].stot, 1.0);
        assert_eq!(r.inputs[0].s1, 0.25);
        let zero = InputPartials { d1: 0.0, dtot: 0.0, dgsm: 0.0, dgsm_ub: 0.0 };
        let r = normalize_report(&[zero, zero], 1.0, VarianceSource::Empirical).unwrap();
        assert!(r.inputs.iter().all(|i| i.s1 == 0.0 && i.stot == 0.0));
        assert!(normalize_report(&[p], 0.0, VarianceSource::Coefficients).is_err());
    }

    #[test]
    fn mc_reference_linear_and_inert() {
        struct Linear;
        impl Model for Linear {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64]) -> f64 {
                3.0 * x[0]
            }
            fn gradient(&self, _: &[f64]) -> Vec<f64> {
                vec![3.0, 0.0]
            }
        }
        let ms = [uniform(0.0, 1.0), uniform(0.0, 1.0)];
        assert_eq!(dgsm_mc_reference(&Linear, &ms, 1000, 1, 0).unwrap(), 9.0);
        assert_eq!(dgsm_mc_reference(&Linear, &ms, 1000, 1, 1).unwrap(), 0.0);
        assert!(dgsm_mc_reference(&Linear, &ms, 10, 1, 2).is_err());
    }

    #[test]
    fn relmse_examples() {
        let s = InputSpace::new(&[uniform(0.0, 2.0), uniform(1.0, 3.0)], 3, 10).unwrap();
        let e = expansion(&s, 3, &[(&[0, 0], 1.0), (&[1, 1], 0.5), (&[2, 0], -0.3)]);
        let f = synthetic_target(e.basis().clone(), e.coefficients().to_vec(), s.maps()).unwrap();
        let ms = s.model_marginals();
        assert!(relmse(|x| e.eval(x), &f, &ms, 1000, 3).unwrap() < 1e-28);
        let mean = relmse(|_| Ok(1.0), &f, &ms, 100_000, 4).unwrap();
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(relmse_from_values(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn synthetic_indices_are_normalized_squares() {
        let s = unit_space(3);
        let e = expansion(&s, 3, &[(&[0, 0, 0], 4.0), (&[1, 0, 0], 1.0), (&[0, 2, 0], 2.0), (&[1, 0, 1], 1.0)]);
        let r = coefficient_report(&e).unwrap();
        assert_eq!(r.d, 6.0);
        assert!((r.inputs[0].s1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.inputs[0].stot - 2.0 / 6.0).abs() < 1e-15);
        assert!((r.inputs[1].s1 - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.inputs[2].stot - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.inputs[2].s1, 0.0);
    }

    #[test]
    fn additive_model_has_no_interactions() {
        let s = unit_space(3);
        let f = {
            let e = expansion(&s, 3, &[(&[2, 0, 0], 1.0), (&[0, 1, 0], -0.5), (&[0, 0, 3], 0.25)]);
            synthetic_target(e.basis().clone(), e.coefficients().to_vec(), s.maps()).unwrap()
        };
        let d = crate::design::lhs_maximin(&s.model_marginals(), 40, 2, 5);
        let cfg = FitConfig::adaptive(3);
        for i in 0..3 {
            let dy: Vec<f64> = d.points.iter().map(|x| f.gradient(x)[i]).collect();
            let e = fit_poince_der(&s, &d.points, &dy, i, &cfg).unwrap();
            let (d1, dtot) = partial_variances(&e, i);
            assert!((d1 - dtot).abs() < 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_expansion(coeffs: &[f64]) -> Expansion {
            let ms = [
                Marginal::with_bounds(Family::Gumbel { location: 0.0, scale: 1.0 }, -1.0, 4.0).unwrap(),
                uniform(0.0, 1.0),
                uniform(-3.0, 3.0),
            ];
            let space = InputSpace::new(&ms, 3, 60).unwrap();
            let basis: BasisSet = space.basis_set(Truncation::total_degree(3)).unwrap();
            let c: Vec<f64> = (0..basis.len()).map(|k| coeffs[k % coeffs.len()]).collect();
            Expansion::new(basis, c, true, Provenance::PoinceLars, vec![StandardizationMap::IDENTITY; 3]).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn partition_arithmetic(coeffs in proptest::collection::vec(-3.0f64..3.0, 1..25)) {
                let e = arbitrary_expansion(&coeffs);
                let d = total_variance(&e);
                let parts: Vec<(f64, f64)> = (0..3).map(|i| partial_variances(&e, i)).collect();
                let slack = 1e-12 * (1.0 + d);
                prop_assert!(parts.iter().map(|p| p.0).sum::<f64>() <= d + slack);
                prop_assert!(parts.iter().map(|p| p.1).fold(0.0, f64::max) <= d + slack);
                prop_assert!(d <= parts.iter().map(|p| p.1).sum::<f64>() + slack);
                for (i, (d1, dtot)) in parts.iter().enumerate() {
                    prop_assert!(*d1 <= *dtot);
                    prop_assert!(dgsm_upper_bound(&e, i).unwrap() >= *dtot);
                }
            }
        }
    }
}
