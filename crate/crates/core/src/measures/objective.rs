//! Benchmark objectives for the annealing optimizer.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::grid::GridFunction;

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Griewank,
    Rosenbrock,
    Ackley,
    Rastrigin,
    /// `|x - 0.3|^2 + |x - 0.1|^2`, minimum `0.02 d` at `0.2`.
    QuadU5,
    /// `2 - e^{-|x-0.3|^2} - e^{-|x+0.3|^2}`.
    Gauss2U6,
    /// `|x|^2`.
    Sphere,
    /// Grid-interpolated values, clamped to the grid box.
    Tabulated(Arc<GridFunction>),
}

pub const OBJECTIVE_NAMES: &[&str] =
    &["griewank", "rosenbrock", "ackley", "rastrigin", "quad-u5", "gauss2-u6", "sphere"];

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Griewank => {
                let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = x.iter().enumerate().map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos()).product();
                s - p + 1.0
            }
            Objective::Rosenbrock => x
                .windows(2)
                .map(|w| (1.0 - w[0]).powi(2) + 100.0 * (w[0] * w[0] - w[1]).powi(2))
                .sum(),
            Objective::Ackley => {
                let d = x.len() as f64;
                let r = (x.iter().map(|v| v * v).sum::<f64>() / d).sqrt();
                let c = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
                20.0 - 20.0 * (-0.2 * r).exp() + E - c.exp()
            }
            Objective::Rastrigin => {
                let d = x.len() as f64;
                10.0 * d + x.iter().map(|v| v * v / 2.0 - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
            Objective::QuadU5 => x.iter().map(|v| (v - 0.3).powi(2) + (v - 0.1).powi(2)).sum(),
            Objective::Gauss2U6 => {
                let a: f64 = x.iter().map(|v| (v - 0.3).powi(2)).sum();
                let b: f64 = x.iter().map(|v| (v + 0.3).powi(2)).sum();
                2.0 - (-a).exp() - (-b).exp()
            }
            Objective::Sphere => x.iter().map(|v| v * v).sum(),
            Objective::Tabulated(g) => g.interpolate_clamped(x),
        }
    }

    /// Evaluates and rejects NaN or negative values.
    pub fn checked_eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x);
        if v.is_nan() || v < 0.0 {
            return Err(Error::InvalidObjective { value: v, point: x.to_vec() });
        }
        Ok(v)
    }

    /// Known global minimum `(point, value)` in dimension `d`, where one exists.
    pub fn known_minimum(&self, d: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            Objective::Griewank | Objective::Ackley | Objective::Rastrigin | Objective::Sphere => {
                Some((vec![0.0; d], 0.0))
            }
            Objective::Rosenbrock => Some((vec![1.0; d], 0.0)),
            Objective::QuadU5 => Some((vec![0.2; d], 0.02 * d as f64)),
            Objective::Gauss2U6 | Objective::Tabulated(_) => None,
        }
    }

    pub fn dim_hint(&self) -> Option<usize> {
        match self {
            Objective::Tabulated(g) => Some(g.dim()),
            _ => None,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "griewank" => Objective::Griewank,
            "rosenbrock" => Objective::Rosenbrock,
            "ackley" => Objective::Ackley,
            "rastrigin" => Objective::Rastrigin,
            "quad-u5" => Objective::QuadU5,
            "gauss2-u6" => Objective::Gauss2U6,
            "sphere" => Objective::Sphere,
            other => {
                return Err(Error::invalid(format!(
                    "unknown objective `{other}`; known: {}",
                    OBJECTIVE_NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Objective::Griewank => "griewank",
            Objective::Rosenbrock => "rosenbrock",
            Objective::Ackley => "ackley",
            Objective::Rastrigin => "rastrigin",
            Objective::QuadU5 => "quad-u5",
            Objective::Gauss2U6 => "gauss2-u6",
            Objective::Sphere => "sphere",
            Objective::Tabulated(_) => "tabulated",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RngStream;

    #[test]
    fn two_dimensional_formulas() {
        let x: [f64; 2] = [0.7, -1.3];
        let g = (x[0] * x[0] + x[1] * x[1]) / 4000.0 - x[0].cos() * (x[1] / 2f64.sqrt()).cos() + 1.0;
        assert!((Objective::Griewank.eval(&x) - g).abs() < 1e-15);
        let r = (1.0 - x[0]).powi(2) + 100.0 * (x[0] * x[0] - x[1]).powi(2);
        assert!((Objective::Rosenbrock.eval(&x) - r).abs() < 1e-12);
        let n2 = x[0] * x[0] + x[1] * x[1];
        let ras = 20.0 + n2 / 2.0 - 10.0 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos());
        assert!((Objective::Rastrigin.eval(&x) - ras).abs() < 1e-12);
        let ack = 20.0 - 20.0 * (-n2.sqrt() / (5.0 * 2f64.sqrt())).exp() + E
            - (((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()) / 2.0).exp();
        assert!((Objective::Ackley.eval(&x) - ack).abs() < 1e-12);
    }

    #[test]
    fn minima() {
        for name in OBJECTIVE_NAMES {
            let obj: Objective = name.parse().unwrap();
            if let Some((p, v)) = obj.known_minimum(2) {
                assert!((obj.eval(&p) - v).abs() < 1e-14, "{name}");
            }
        }
        assert!((Objective::QuadU5.eval(&[0.2, 0.2]) - 0.04).abs() < 1e-15);
        let u6 = Objective::Gauss2U6.eval(&[0.0, 0.0]);
        assert!((u6 - (2.0 - 2.0 * (-0.18f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn nonnegative_on_random_points() {
        let mut rng = RngStream::new(21, 0);
        for name in OBJECTIVE_NAMES {
            let obj: Objective = name.parse().unwrap();
            for _ in 0..2000 {
                let x = rng.uniform_cube(&[0.0, 0.0], 20.0);
                assert!(obj.checked_eval(&x).is_ok(), "{name} at {x:?}");
            }
        }
        assert!("nope".parse::<Objective>().is_err());
    }
}
