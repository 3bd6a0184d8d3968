use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite point set `{eta_j}` in `R^d`, stored row-major.
///
/// Also used as the sample cloud type: every generated output and every
/// reference draw is a `Dataset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    radius_l2: f64,
    radius_linf: f64,
}

/// Sample clouds share the dataset representation.
pub type SampleCloud = Dataset;

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be positive"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "buffer of {} values is not a multiple of dimension {dim}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate in point {}", i / dim)));
        }
        let mut radius_l2: f64 = 0.0;
        let mut radius_linf: f64 = 0.0;
        for p in points.chunks_exact(dim) {
            radius_l2 = radius_l2.max(p.iter().map(|v| v * v).sum::<f64>().sqrt());
            radius_linf = radius_linf.max(p.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        Ok(Self { dim, points, radius_l2, radius_linf })
    }

    pub fn from_points(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::invalid(format!("point {i} has dimension {} != {dim}", r.len())));
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(dim, flat)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new(), radius_l2: 0.0, radius_linf: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `K = max_j |eta_j|_2`.
    pub fn radius_l2(&self) -> f64 {
        self.radius_l2
    }

    pub fn radius_linf(&self) -> f64 {
        self.radius_linf
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// First `n` points as a new dataset.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!("prefix {n} out of range 1..={}", self.len())));
        }
        Self::from_flat(self.dim, self.points[..n * self.dim].to_vec())
    }

    /// Coordinate `i` of every point.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.iter().map(|p| p[i]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_path(path).map_err(csv_io)?;
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        w.write_record(&header).map_err(csv_io)?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| format!("{v:?}"))).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Reads a CSV file with one point per row and an optional header line.
///
/// Row numbers in errors are 1-based file lines.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut dim = None;
    let mut flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            // A non-numeric first row is a header.
            Err(_) if row == 1 => {
                dim = Some(record.len());
                continue;
            }
            Err(e) => {
                let bad = record.iter().find(|c| c.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse { row, message: format!("non-numeric cell `{bad}`: {e}") });
            }
        };
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {d} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { row, message: format!("non-finite value {v}") });
        }
        flat.extend(values);
    }
    let dim = dim.unwrap_or(0);
    if flat.is_empty() {
        return Err(Error::Parse { row: 0, message: "no data rows".into() });
    }
    Dataset::from_flat(dim, flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RngStream;
    use proptest::prelude::*;

    #[test]
    fn one_column() {
        let ds = parse_dataset("0.0\n1.0\n").unwrap();
        assert_eq!((ds.dim(), ds.len(), ds.radius_l2()), (1, 2, 1.0));
    }

    #[test]
    fn header_and_pythagoras() {
        let ds = parse_dataset("x,y\n0.3,0.4\n").unwrap();
        assert_eq!((ds.dim(), ds.len()), (2, 1));
        assert!((ds.radius_l2() - 0.5).abs() < 1e-15);
        assert_eq!(ds.radius_linf(), 0.4);
    }

    #[test]
    fn errors_carry_row_numbers() {
        match parse_dataset("1,2\n3\n") {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_dataset("1,2\n3,abc\n") {
            Err(Error::Parse { row: 2, message }) => assert!(message.contains("abc")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_dataset(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_dataset("x,y\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn unit_cube_radius() {
        let d = 100;
        let n = 10_000;
        let mut rng = RngStream::new(1, 0);
        let mut text = String::new();
        for _ in 0..n {
            let row: Vec<String> = (0..d).map(|_| format!("{}", rng.uniform())).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let ds = parse_dataset(&text).unwrap();
        assert_eq!((ds.dim(), ds.len()), (d, n));
        assert!(ds.radius_l2() <= (d as f64).sqrt());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = Dataset::from_points(2, &[vec![0.1, 1.0 / 3.0], vec![-2.5e-12, 7.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        ds.write_csv(&path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn radii_are_attained_maxima(rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..40)) {
            let ds = Dataset::from_points(3, &rows).unwrap();
            let l2: Vec<f64> = ds.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            let linf: Vec<f64> = ds.iter().map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
            prop_assert!(l2.iter().all(|&r| r <= ds.radius_l2()));
            prop_assert!(linf.iter().all(|&r| r <= ds.radius_linf()));
            prop_assert!(l2.iter().any(|&r| r == ds.radius_l2()));
            prop_assert!(linf.iter().any(|&r| r == ds.radius_linf()));
        }
    }
}
