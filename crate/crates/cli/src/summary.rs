//! Box-plot statistics per estimator, input and design size.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::config::Estimator;
use crate::runner::ResultRow;

pub const METRICS: [&str; 6] = ["S1", "Stot", "D", "dgsm", "dgsm_ub", "relmse"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub input: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

fn metric(row: &ResultRow, name: &str) -> Option<f64> {
    match name {
        "S1" => Some(row.s1),
        "Stot" => Some(row.stot),
        "D" => Some(row.d),
        "dgsm" => Some(row.dgsm),
        "dgsm_ub" => Some(row.dgsm_ub),
        "relmse" => row.relmse,
        _ => None,
    }
}

fn describe(values: &mut [f64]) -> [f64; 9] {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let q1 = quantile(values, 0.25);
    let med = quantile(values, 0.5);
    let q3 = quantile(values, 0.75);
    let reach = 1.5 * (q3 - q1);
    let lo = values.iter().copied().find(|v| *v >= q1 - reach).unwrap_or(q1);
    let hi = values.iter().rev().copied().find(|v| *v <= q3 + reach).unwrap_or(q3);
    [mean, std, values[0], q1, med, q3, values[values.len() - 1], lo, hi]
}

/// Groups by (estimator, input, N), keeping the first-seen order of inputs.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        bail!("no result rows to summarize");
    }
    let mut input_order: Vec<&str> = Vec::new();
    for r in rows {
        if !input_order.contains(&r.input.as_str()) {
            input_order.push(&r.input);
        }
    }
    let mut groups: BTreeMap<(Estimator, usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let k = input_order.iter().position(|i| *i == r.input).expect("seen");
        groups.entry((r.estimator, r.n, k)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((estimator, n, k), members) in groups {
        for name in METRICS {
            let mut values: Vec<f64> = members.iter().filter_map(|r| metric(r, name)).collect();
            if values.is_empty() {
                continue;
            }
            let [mean, std, min, q1, median, q3, max, whisker_low, whisker_high] = describe(&mut values);
            out.push(SummaryRow {
                estimator,
                input: input_order[k].to_string(),
                n,
                metric: name.to_string(),
                count: values.len(),
                mean,
                std,
                min,
                q1,
                median,
                q3,
                max,
                whisker_low,
                whisker_high,
            });
        }
    }
    Ok(out)
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rep: usize, stot: f64) -> ResultRow {
        ResultRow {
            estimator: Estimator::PoinceLars,
            input: "Q".into(),
            n: 50,
            replication: rep,
            s1: 0.3,
            stot,
            d: 1.0,
            dtot: stot,
            d1: 0.3,
            dgsm: 2.0,
            dgsm_ub: 1.0,
            relmse: None,
            p_star: 3,
            n_active: 4,
        }
    }

    fn find<'a>(s: &'a [SummaryRow], metric: &str) -> &'a SummaryRow {
        s.iter().find(|r| r.metric == metric).unwrap()
    }

    #[test]
    fn single_replication() {
        let s = summarize(&[row(0, 0.42)]).unwrap();
        let stot = find(&s, "Stot");
        assert_eq!(stot.median, 0.42);
        assert_eq!(stot.std, 0.0);
        assert!(s.iter().all(|r| r.metric != "relmse"));
    }

    #[test]
    fn constant_column_has_zero_iqr() {
        let rows: Vec<ResultRow> = (0..7).map(|k| row(k, k as f64)).collect();
        let s = summarize(&rows).unwrap();
        let s1 = find(&s, "S1");
        assert_eq!(s1.q3 - s1.q1, 0.0);
        let stot = find(&s, "Stot");
        assert_eq!((stot.q1, stot.median, stot.q3), (1.5, 3.0, 4.5));
    }

    #[test]
    fn whiskers_exclude_outliers() {
        let mut rows: Vec<ResultRow> = (0..9).map(|k| row(k, 1.0 + 0.01 * k as f64)).collect();
        rows.push(row(9, 50.0));
        let s = summarize(&rows).unwrap();
        let stot = find(&s, "Stot");
        assert_eq!(stot.max, 50.0);
        assert!(stot.whisker_high < 2.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
    }
}
