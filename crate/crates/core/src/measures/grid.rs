//! Rectangular grid-tabulated functions with multilinear interpolation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid metadata stored in the JSON sidecar next to a tabulated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    meta: GridMeta,
    /// Values in row-major order, last axis fastest.
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(meta: GridMeta, values: Vec<f64>) -> Result<Self> {
        let d = meta.shape.len();
        if d == 0 || meta.min.len() != d || meta.max.len() != d {
            return Err(Error::invalid("grid metadata axes disagree"));
        }
        if meta.shape.iter().any(|&s| s < 2) {
            return Err(Error::invalid("every grid axis needs at least two nodes"));
        }
        if meta.min.iter().zip(&meta.max).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("grid min must be below max on every axis"));
        }
        let total: usize = meta.shape.iter().product();
        if values.len() != total {
            return Err(Error::invalid(format!("grid expects {total} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(Self { meta, values })
    }

    /// Reads `x0,...,x{d-1},f` rows plus the `<path>.json` sidecar
    /// (`path` with its extension replaced by `json`).
    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let meta_path = csv_path.with_extension("json");
        let meta: GridMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
        let text = std::fs::read_to_string(csv_path)?;
        Self::parse(meta, &text)
    }

    pub fn parse(meta: GridMeta, text: &str) -> Result<Self> {
        let d = meta.shape.len();
        let total: usize = meta.shape.iter().product();
        let mut values = vec![f64::NAN; total];
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        for (i, rec) in reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            if rec.len() != d + 1 {
                return Err(Error::Parse { row, message: format!("expected {} columns", d + 1) });
            }
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            let mut flat = 0usize;
            for a in 0..d {
                let pos = (nums[a] - meta.min[a]) / (meta.max[a] - meta.min[a]) * (meta.shape[a] - 1) as f64;
                let idx = pos.round();
                if (pos - idx).abs() > 1e-6 || idx < 0.0 || idx as usize >= meta.shape[a] {
                    return Err(Error::Parse { row, message: format!("coordinate {} is off the grid", nums[a]) });
                }
                flat = flat * meta.shape[a] + idx as usize;
            }
            if nums[d] < 0.0 {
                return Err(Error::Parse { row, message: "negative function value".into() });
            }
            values[flat] = nums[d];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse { row: 0, message: "grid has missing nodes".into() });
        }
        Self::new(meta, values)
    }

    pub fn dim(&self) -> usize {
        self.meta.shape.len()
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.meta.min.iter().zip(&self.meta.max)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Multilinear interpolation; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        if !self.contains(x) {
            return None;
        }
        Some(self.interpolate_clamped(x))
    }

    /// Multilinear interpolation with coordinates clamped into the box.
    pub fn interpolate_clamped(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let n = self.meta.shape[a];
            let pos = ((x[a] - self.meta.min[a]) / (self.meta.max[a] - self.meta.min[a]) * (n - 1) as f64)
                .clamp(0.0, (n - 1) as f64);
            let i = (pos.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = pos - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..d {
                let bit = (corner >> (d - 1 - a)) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.meta.shape[a] + base[a] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}
