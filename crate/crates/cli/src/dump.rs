//! One-dimensional basis inspection tables.
//!
//! A marginal is written `family:p1,p2[@lo,hi]`, e.g. `gaussian:0,1@-3,3` or
//! `uniform:0,2`; an empty bound such as `@,5` leaves that side open.

use std::path::Path;

use anyhow::{bail, Context, Result};
use poince::marginals::prepare;
use poince::{Marginal, MarginalSpec, PoincareBasis1D};

pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";
pub const BASIS_FILE: &str = "basis.csv";

pub fn parse_marginal(spec: &str) -> Result<MarginalSpec> {
    let (head, bounds) = match spec.split_once('@') {
        Some((h, b)) => (h, Some(b)),
        None => (spec, None),
    };
    let (family, params) = head.split_once(':').with_context(|| format!("expected `family:params` in `{spec}`"))?;
    let params = params
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad parameter `{v}` in `{spec}`")))
        .collect::<Result<Vec<_>>>()?;
    let bounds = match bounds {
        None => None,
        Some(b) => {
            let parts: Vec<&str> = b.split(',').collect();
            if parts.len() != 2 {
                bail!("bounds must read `lo,hi` in `{spec}`");
            }
            let side = |s: &str| -> Result<Option<f64>> {
                let s = s.trim();
                if s.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(s.parse().with_context(|| format!("bad bound `{s}` in `{spec}`"))?))
                }
            };
            Some([side(parts[0])?, side(parts[1])?])
        }
    };
    Ok(MarginalSpec { name: None, family: family.trim().to_string(), params, bounds })
}

pub struct Dump {
    pub marginal: Marginal,
    pub basis: PoincareBasis1D,
    /// Grid in model units.
    pub xs: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
}

/// Builds the basis of the prepared marginal and samples it on `points` nodes.
///
/// Derivatives are taken with respect to the model variable.
pub fn dump(spec: &str, p_max: usize, grid_n: usize, points: usize) -> Result<Dump> {
    let marginal = parse_marginal(spec)?.build()?;
    let prepared = prepare(&marginal)?;
    let basis = PoincareBasis1D::build(&prepared.standard, p_max, grid_n)?;
    let (us, values, mut derivatives) = basis.sample_grid(points);
    let scale = prepared.map.scale;
    for row in &mut derivatives {
        row.iter_mut().for_each(|v| *v /= scale);
    }
    let xs = us.iter().map(|&u| prepared.map.inverse(u)).collect();
    Ok(Dump { marginal: prepared.model, basis, xs, values, derivatives })
}

impl Dump {
    /// Eigenvalues in model units, with the standard-coordinate ones alongside.
    pub fn eigenvalue_rows(&self, scale: f64) -> Vec<(usize, f64, f64)> {
        self.basis.eigenvalues().iter().enumerate().map(|(k, &l)| (k, l / (scale * scale), l)).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let scale = prepare(&self.marginal)?.map.scale;
        let mut w = csv::Writer::from_path(dir.join(EIGENVALUES_FILE))?;
        w.write_record(["alpha", "lambda", "lambda_standard"])?;
        for (k, l, ls) in self.eigenvalue_rows(scale) {
            w.write_record([k.to_string(), format!("{l:e}"), format!("{ls:e}")])?;
        }
        w.flush()?;

        let p = self.values.len();
        let mut w = csv::Writer::from_path(dir.join(BASIS_FILE))?;
        let mut header = vec!["x".to_string()];
        header.extend((0..p).map(|k| format!("phi{k}")));
        header.extend((0..p).map(|k| format!("dphi{k}")));
        w.write_record(&header)?;
        for (j, x) in self.xs.iter().enumerate() {
            let mut rec = vec![format!("{x:e}")];
            rec.extend(self.values.iter().map(|v| format!("{:e}", v[j])));
            rec.extend(self.derivatives.iter().map(|v| format!("{:e}", v[j])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        let s = parse_marginal("gaussian:0,1@-3,").unwrap();
        assert_eq!(s.family, "gaussian");
        assert_eq!(s.params, vec![0.0, 1.0]);
        assert_eq!(s.bounds, Some([Some(-3.0), None]));
        assert!(parse_marginal("uniform:0,1").unwrap().bounds.is_none());
        assert!(parse_marginal("uniform").is_err());
        assert!(parse_marginal("uniform:0,x").is_err());
        assert!(parse_marginal("uniform:0,1@2").is_err());
    }

    #[test]
    fn uniform_dump_in_model_units() {
        let d = dump("uniform:0,2", 3, 200, 11).unwrap();
        assert_eq!(d.xs.first().copied(), Some(0.0));
        assert!((d.xs[10] - 2.0).abs() < 1e-12);
        // On [0, 2], lambda_1 = (pi / 2)^2.
        let scale = prepare(&d.marginal).unwrap().map.scale;
        let l1 = d.eigenvalue_rows(scale)[1].1;
        assert!((l1 - (std::f64::consts::PI / 2.0).powi(2)).abs() < 1e-9, "{l1}");
        // phi_1 is monotone on the support.
        let v = &d.values[1];
        assert!(v.windows(2).all(|w| w[0] > w[1]) || v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        dump("triangular:-1,1", 2, 100, 5).unwrap().write(dir.path()).unwrap();
        let basis = std::fs::read_to_string(dir.path().join(BASIS_FILE)).unwrap();
        assert_eq!(basis.lines().count(), 6);
        assert!(basis.starts_with("x,phi0,phi1,phi2,dphi0,dphi1,dphi2"));
        let eig = std::fs::read_to_string(dir.path().join(EIGENVALUES_FILE)).unwrap();
        assert_eq!(eig.lines().count(), 4);
    }
}
