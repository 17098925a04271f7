//! Models supplied as CSV tables of inputs, output and optional derivatives.
//!
//! Derivative columns are tagged `d:<input name>` in the header.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub const DERIVATIVE_PREFIX: &str = "d:";

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Per-row gradient, when every input has a derivative column.
    pub gradients: Option<Vec<Vec<f64>>>,
}

impl DataSet {
    pub fn load(path: &Path, output: &str) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::parse(file, output).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse<R: std::io::Read>(reader: R, output: &str) -> Result<Self> {
        let (header, rows) = poince::design::read_points(reader)?;
        let out_col = header
            .iter()
            .position(|h| h == output)
            .with_context(|| format!("no output column `{output}`"))?;
        let inputs: Vec<usize> = (0..header.len())
            .filter(|&k| k != out_col && !header[k].starts_with(DERIVATIVE_PREFIX))
            .collect();
        if inputs.is_empty() {
            bail!("no input columns");
        }
        let names: Vec<String> = inputs.iter().map(|&k| header[k].clone()).collect();
        let deriv_cols: Vec<Option<usize>> = names
            .iter()
            .map(|n| header.iter().position(|h| h.strip_prefix(DERIVATIVE_PREFIX) == Some(n.as_str())))
            .collect();
        for h in &header {
            if let Some(n) = h.strip_prefix(DERIVATIVE_PREFIX) {
                if !names.iter().any(|m| m == n) {
                    bail!("derivative column `{h}` names no input");
                }
            }
        }
        let x = rows.iter().map(|r| inputs.iter().map(|&k| r[k]).collect()).collect();
        let y = rows.iter().map(|r| r[out_col]).collect();
        let gradients = if deriv_cols.iter().all(Option::is_some) {
            Some(rows.iter().map(|r| deriv_cols.iter().map(|k| r[k.unwrap()]).collect()).collect())
        } else {
            None
        };
        Ok(Self { names, x, y, gradients })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn write<W: std::io::Write>(&self, output: &str, writer: W) -> Result<()> {
        let mut header = self.names.clone();
        header.push(output.to_string());
        if self.gradients.is_some() {
            header.extend(self.names.iter().map(|n| format!("{DERIVATIVE_PREFIX}{n}")));
        }
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|k| {
                let mut r = self.x[k].clone();
                r.push(self.y[k]);
                if let Some(g) = &self.gradients {
                    r.extend_from_slice(&g[k]);
                }
                r
            })
            .collect();
        poince::design::write_points(&header, &rows, writer)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_columns_in_any_order() {
        let text = "d:b,a,y,b,d:a\n0.5,1,2,3,0.25\n1.5,4,5,6,0.75\n";
        let ds = DataSet::parse(text.as_bytes(), "y").unwrap();
        assert_eq!(ds.names, vec!["a", "b"]);
        assert_eq!(ds.x, vec![vec![1.0, 3.0], vec![4.0, 6.0]]);
        assert_eq!(ds.y, vec![2.0, 5.0]);
        assert_eq!(ds.gradients, Some(vec![vec![0.25, 0.5], vec![0.75, 1.5]]));
    }

    #[test]
    fn partial_derivatives_count_as_missing() {
        let ds = DataSet::parse("a,b,y,d:a\n1,2,3,4\n".as_bytes(), "y").unwrap();
        assert!(ds.gradients.is_none());
        assert!(DataSet::parse("a,y,d:c\n1,2,3\n".as_bytes(), "y").is_err());
        assert!(DataSet::parse("a,b\n1,2\n".as_bytes(), "y").is_err());
    }

    #[test]
    fn write_round_trip() {
        let ds = DataSet {
            names: vec!["u".into(), "v".into()],
            x: vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            y: vec![1.0, 2.0],
            gradients: Some(vec![vec![5.0, 6.0], vec![7.0, 8.0]]),
        };
        let mut buf = Vec::new();
        ds.write("out", &mut buf).unwrap();
        assert_eq!(DataSet::parse(buf.as_slice(), "out").unwrap(), ds);
    }
}
