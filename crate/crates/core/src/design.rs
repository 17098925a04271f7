//! Experimental designs: maximin Latin hypercubes, Monte Carlo samples and
//! subsampling of fixed data sets.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::Marginal;

pub const DEFAULT_RESTARTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    LhsMaximin,
    Mc,
    Subsample,
}

/// `N` input points in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDesign {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub kind: DesignKind,
}

impl ExperimentalDesign {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|x| x[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<()> {
        write_points(names, &self.points, writer)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-hypercube Latin hypercube with uniform jitter inside each stratum.
fn unit_lhs(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (k, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            points[k][j] = (stratum as f64 + u) / n as f64;
        }
    }
    points
}

/// Smallest squared Euclidean distance between two points; `+inf` below two points.
pub fn min_sq_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let mut s = 0.0;
            for (x, y) in points[a].iter().zip(&points[b]) {
                s += (x - y) * (x - y);
                if s >= best {
                    break;
                }
            }
            best = best.min(s);
        }
    }
    best
}

/// Clamp away from 0 and 1 so unbounded quantiles stay finite.
fn open_unit(u: f64) -> f64 {
    u.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn map_through(marginals: &[Marginal], unit: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    unit.into_iter()
        .map(|u| u.iter().zip(marginals).map(|(&p, m)| m.quantile(open_unit(p))).collect())
        .collect()
}

/// Best of `restarts` random Latin hypercubes under the maximin criterion,
/// mapped through the marginal quantiles.
pub fn lhs_maximin(marginals: &[Marginal], n: usize, seed: u64, restarts: usize) -> ExperimentalDesign {
    let mut rng = rng(seed);
    let d = marginals.len();
    let mut best = unit_lhs(n, d, &mut rng);
    let mut best_dist = min_sq_distance(&best);
    for _ in 1..restarts.max(1) {
        let cand = unit_lhs(n, d, &mut rng);
        let dist = min_sq_distance(&cand);
        if dist > best_dist {
            best = cand;
            best_dist = dist;
        }
    }
    ExperimentalDesign { points: map_through(marginals, best), seed, kind: DesignKind::LhsMaximin }
}

/// I.i.d. inverse-CDF sample.
pub fn mc_sample(marginals: &[Marginal], n: usize, seed: u64) -> ExperimentalDesign {
    let mut rng = rng(seed);
    let unit = (0..n)
        .map(|_| (0..marginals.len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    ExperimentalDesign { points: map_through(marginals, unit), seed, kind: DesignKind::Mc }
}

/// `n` distinct row indices out of `total`, in draw order.
pub fn subsample_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::DimensionMismatch(format!("cannot draw {n} rows out of {total}")));
    }
    let mut rng = rng(seed);
    Ok(rand::seq::index::sample(&mut rng, total, n).into_vec())
}

pub fn write_points<W: Write>(names: &[String], points: &[Vec<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names)?;
    for x in points {
        if x.len() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, header has {}",
                x.len(),
                names.len()
            )));
        }
        w.write_record(x.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Header names and rows of a numeric CSV table.
pub fn read_points<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != names.len() {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 1, row.len(), names.len())));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::{truncate, Family};

    fn uniform(a: f64, b: f64) -> Marginal {
        Marginal::new(Family::Uniform { lower: a, upper: b }).unwrap()
    }

    #[test]
    fn one_point_per_quartile() {
        let d = lhs_maximin(&[uniform(0.0, 1.0)], 4, 3, DEFAULT_RESTARTS);
        let mut strata: Vec<usize> = d.points.iter().map(|x| (x[0] * 4.0).floor() as usize).collect();
        strata.sort();
        assert_eq!(strata, vec![0, 1, 2, 3]);
    }

    #[test]
    fn stratification_in_every_dimension_after_mapping() {
        let g = truncate(&Marginal::new(Family::Gaussian { mean: 30.0, std: 8.0 }).unwrap()).unwrap();
        let ms = vec![uniform(7.0, 9.0), g.clone(), uniform(-1.0, 3.0)];
        let n = 37;
        let d = lhs_maximin(&ms, n, 11, 10);
        for (j, m) in ms.iter().enumerate() {
            let mut s: Vec<usize> = d.points.iter().map(|x| (m.cdf(x[j]) * n as f64).floor() as usize).collect();
            s.sort();
            assert_eq!(s, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn reproducible() {
        let ms = vec![uniform(0.0, 1.0); 5];
        assert_eq!(lhs_maximin(&ms, 20, 9, 5), lhs_maximin(&ms, 20, 9, 5));
        assert_eq!(mc_sample(&ms, 20, 9), mc_sample(&ms, 20, 9));
        assert_ne!(mc_sample(&ms, 20, 9), mc_sample(&ms, 20, 10));
    }

    #[test]
    fn maximin_improves_on_single_lhs() {
        let ms = vec![uniform(0.0, 1.0); 8];
        for seed in 0..5 {
            let base = lhs_maximin(&ms, 30, seed, 1);
            let opt = lhs_maximin(&ms, 30, seed, 20);
            assert!(min_sq_distance(&opt.points) >= min_sq_distance(&base.points));
        }
    }

    #[test]
    fn mc_uniform_mean() {
        let d = mc_sample(&[uniform(7.0, 9.0)], 100_000, 5);
        let mean = d.column(0).iter().sum::<f64>() / d.len() as f64;
        // 3 sigma of the sample mean: 3 * (2 / sqrt 12) / sqrt(1e5).
        assert!((mean - 8.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn samples_inside_truncated_supports() {
        let ms = vec![
            truncate(&Marginal::new(Family::Gaussian { mean: 0.0, std: 1.0 }).unwrap()).unwrap(),
            truncate(&Marginal::new(Family::Gumbel { location: 1013.0, scale: 558.0 }).unwrap()).unwrap(),
            Marginal::with_bounds(Family::Gumbel { location: 1013.0, scale: 558.0 }, 500.0, 3000.0).unwrap(),
        ];
        for x in mc_sample(&ms, 5000, 1).points {
            for (v, m) in x.iter().zip(&ms) {
                let (a, b) = m.support();
                assert!(*v >= a && *v <= b);
            }
        }
    }

    #[test]
    fn subsampling_without_replacement() {
        let idx = subsample_indices(100, 100, 4).unwrap();
        let mut s = idx.clone();
        s.sort();
        assert_eq!(s, (0..100).collect::<Vec<_>>());
        assert_eq!(subsample_indices(1000, 50, 4).unwrap(), subsample_indices(1000, 50, 4).unwrap());
        assert!(subsample_indices(10, 11, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ms = vec![uniform(0.0, 1.0), uniform(-3.0, 2.0)];
        let d = mc_sample(&ms, 10, 2);
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        d.write_csv(&names, &mut buf).unwrap();
        let (n2, p2) = read_points(buf.as_slice()).unwrap();
        assert_eq!(n2, names);
        assert_eq!(p2, d.points);
        assert!(read_points("a,b\n1,x\n".as_bytes()).is_err());
    }
}
