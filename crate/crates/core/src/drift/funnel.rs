use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::drift::{SoftmaxAccumulator, WeightDiagnostics};
use crate::error::{Error, Result};
use crate::measures::{FunnelSpec, RngStream};
use crate::schedule::{Schedule, ScheduleValue};

/// Exponent used for the tail variance inside the 1-D funnel expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunnelVariant {
    /// Tail variance `sigma^2 + beta^2 e^{2 alpha xi}`.
    Direct,
    /// Tail variance `sigma^2 + beta^2 e^{2 alpha beta xi}`.
    Scaled,
}

impl FunnelVariant {
    fn rate(self, alpha: f64, beta: f64) -> f64 {
        match self {
            FunnelVariant::Direct => 2.0 * alpha,
            FunnelVariant::Scaled => 2.0 * alpha * beta,
        }
    }
}

impl fmt::Display for FunnelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunnelVariant::Direct => "direct",
            FunnelVariant::Scaled => "scaled",
        })
    }
}

impl FromStr for FunnelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(FunnelVariant::Direct),
            "scaled" => Ok(FunnelVariant::Scaled),
            other => Err(Error::invalid(format!("unknown funnel variant `{other}` (direct|scaled)"))),
        }
    }
}

/// Funnel drift reduced to a 1-D expectation over `xi ~ N(0, 1)`.
///
/// With `s^2 = sigma^2 + beta^2 e^{c xi}` and weight
/// `w = rho_sigma(x1 - beta xi) rho_s(x*)`, the first coordinate of `D` is
/// `E[xi w] / E[w]` and the tail block is `x* E[beta e^{c xi} / s^2 w] / E[w]`.
#[derive(Debug, Clone)]
pub struct FunnelDrift {
    spec: FunnelSpec,
    schedule: Schedule,
    n: usize,
    variant: FunnelVariant,
}

impl FunnelDrift {
    pub fn new(spec: FunnelSpec, schedule: Schedule, n: usize, variant: FunnelVariant) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one draw"));
        }
        Ok(Self { spec, schedule, n, variant })
    }

    pub fn spec(&self) -> &FunnelSpec {
        &self.spec
    }

    pub fn variant(&self) -> FunnelVariant {
        self.variant
    }

    pub fn drift(&self, t: f64, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let sv = self.schedule.evaluate(t)?;
        let mut out = vec![0.0; x.len()];
        self.drift_at(&sv, x, rng, &mut out)?;
        Ok(out)
    }

    pub fn drift_at(&self, sv: &ScheduleValue, x: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Result<WeightDiagnostics> {
        let d = self.spec.dim;
        if x.len() != d {
            return Err(Error::invalid(format!("point has dimension {} but funnel has {d}", x.len())));
        }
        let (sigma, beta) = (sv.sigma, sv.beta);
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        let m = (d - 1) as f64;
        let c = self.variant.rate(self.spec.alpha, beta);
        let mut acc = SoftmaxAccumulator::new(2);
        for _ in 0..self.n {
            let xi = rng.normal();
            let e = (c * xi).exp();
            let s2 = sigma * sigma + beta * beta * e;
            let r = x[0] - beta * xi;
            let log_w = -r * r / (2.0 * sigma * sigma) - 0.5 * m * s2.ln() - tail_sq / (2.0 * s2);
            acc.push(&[xi, beta * e / s2], log_w);
        }
        let mut moments = [0.0; 2];
        let diag = acc.finish(&mut moments).expect("Gaussian weights are finite");
        out[0] = moments[0];
        for (o, v) in out[1..].iter_mut().zip(&x[1..]) {
            *o = v * moments[1];
        }
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_vanishes_with_zero_tail_coordinates() {
        let fd = FunnelDrift::new(FunnelSpec::new(0.7, 4).unwrap(), Schedule::linear(), 1000, FunnelVariant::Direct).unwrap();
        let d = fd.drift(0.5, &[0.3, 0.0, 0.0, 0.0], &mut RngStream::new(1, 0)).unwrap();
        assert!(d[1..].iter().all(|v| *v == 0.0));
        assert!(fd.drift(0.5, &[0.3, 0.0], &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn zero_alpha_is_gaussian() {
        // For a standard normal target D_t(x) = beta x / (sigma^2 + beta^2).
        for variant in [FunnelVariant::Direct, FunnelVariant::Scaled] {
            let fd = FunnelDrift::new(FunnelSpec::new(0.0, 3).unwrap(), Schedule::linear(), 200_000, variant).unwrap();
            let x = [0.4, -0.5, 1.2];
            let t = 0.6;
            let d = fd.drift(t, &x, &mut RngStream::new(5, 0)).unwrap();
            let (s, b) = (0.4, 0.6);
            for i in 0..3 {
                let want = b * x[i] / (s * s + b * b);
                assert!((d[i] - want).abs() < 0.01, "{variant} {i}: {} vs {want}", d[i]);
            }
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [FunnelVariant::Direct, FunnelVariant::Scaled] {
            assert_eq!(v.to_string().parse::<FunnelVariant>().unwrap(), v);
        }
        assert!("other".parse::<FunnelVariant>().is_err());
    }
}
