use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::RngStream;

/// Anisotropic funnel: `x1 ~ N(0, 1)` and, given `x1`, the remaining
/// `d - 1` coordinates are `N(0, e^{2 alpha x1} I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunnelSpec {
    pub alpha: f64,
    pub dim: usize,
}

impl FunnelSpec {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("funnel alpha must be finite and nonnegative"));
        }
        if dim < 2 {
            return Err(Error::invalid("funnel needs dim >= 2"));
        }
        Ok(Self { alpha, dim })
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        let tail: f64 = x[1..].iter().map(|v| v * v).sum();
        let m = (self.dim - 1) as f64;
        let ln2pi = (2.0 * PI).ln();
        -0.5 * (x1 * x1 + ln2pi) - m * (0.5 * ln2pi + self.alpha * x1) - 0.5 * tail * (-2.0 * self.alpha * x1).exp()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Exact draw.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut x = rng.standard_normal(self.dim);
        let s = (self.alpha * x[0]).exp();
        x[1..].iter_mut().for_each(|v| *v *= s);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorized_density() {
        let f = FunnelSpec::new(0.5, 3).unwrap();
        let x = [0.4, -0.3, 1.1];
        let rho = |v: f64, s: f64| (-(v * v) / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s);
        let s = (0.5f64 * 0.4).exp();
        let want = rho(0.4, 1.0) * rho(-0.3, s) * rho(1.1, s);
        assert!((f.eval(&x) - want).abs() < 1e-15);
        assert!(FunnelSpec::new(0.5, 1).is_err());
        assert!(FunnelSpec::new(-1.0, 2).is_err());
    }

    #[test]
    fn samples_have_funnel_moments() {
        let f = FunnelSpec::new(0.5, 2).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 200_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = f.sample(&mut rng);
            s2 += x[1] * x[1];
        }
        // E x2^2 = E e^{2 alpha x1} = e^{2 alpha^2}
        let want = (2.0f64 * 0.25).exp();
        assert!((s2 / n as f64 - want).abs() < 0.03, "{}", s2 / n as f64);
    }
}
