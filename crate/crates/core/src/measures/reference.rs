//! Ground-truth samplers used to score the flow output.

use crate::error::{Error, Result};
use crate::measures::{DensityKind, DensitySpec, RngStream, SampleCloud};

const CDF_INTERVALS: usize = 1 << 18;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// How [`reference_sampler`] draws from a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    InverseCdf,
    ExactMixture,
    ExactBall,
    Rejection,
}

pub fn reference_method(spec: &DensitySpec) -> ReferenceMethod {
    match spec.kind() {
        _ if spec.dim() == 1 => ReferenceMethod::InverseCdf,
        DensityKind::FourGaussians => ReferenceMethod::ExactMixture,
        DensityKind::Ball { .. } => ReferenceMethod::ExactBall,
        _ => ReferenceMethod::Rejection,
    }
}

/// Piecewise-linear CDF of a 1-D density tabulated on a fine uniform grid.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(spec: &DensitySpec) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(Error::invalid("inverse-CDF sampling needs a 1-D density"));
        }
        let (lo, hi) = (spec.lower()[0], spec.upper()[0]);
        let n = CDF_INTERVALS;
        let step = (hi - lo) / n as f64;
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut prev = spec.eval(&[lo]);
        let mut acc = 0.0;
        for i in 1..=n {
            let x = if i == n { hi } else { lo + i as f64 * step };
            let cur = spec.eval(&[x]);
            acc += 0.5 * (prev + cur) * step;
            cdf.push(acc);
            prev = cur;
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("density has no mass"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { lo, step, cdf })
    }

    /// `F^{-1}(p)` for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.lo + (i as f64 - 1.0 + frac) * self.step
    }

    /// `F(x)` by linear interpolation.
    pub fn cdf(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let n = self.cdf.len() - 1;
        if pos >= n as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }
}

/// `count` i.i.d. draws with law proportional to the density.
pub fn reference_sampler(spec: &DensitySpec, rng: &mut RngStream, count: usize) -> Result<SampleCloud> {
    let d = spec.dim();
    let mut out = Vec::with_capacity(count * d);
    match reference_method(spec) {
        ReferenceMethod::InverseCdf => {
            let inv = InverseCdf::new(spec)?;
            for _ in 0..count {
                out.push(inv.quantile(rng.uniform()));
            }
        }
        ReferenceMethod::ExactMixture => {
            const CENTERS: [[f64; 2]; 4] = [[0.8, 0.8], [0.2, 0.2], [0.8, 0.2], [0.2, 0.8]];
            // e^{-|x-c|^2/0.01} has per-coordinate variance 0.005
            let sd = 0.005f64.sqrt();
            while out.len() < count * 2 {
                let c = CENTERS[rng.index_below(4)];
                let p = [c[0] + sd * rng.normal(), c[1] + sd * rng.normal()];
                if spec.contains(&p) {
                    out.extend_from_slice(&p);
                }
            }
        }
        ReferenceMethod::ExactBall => {
            let mut p = vec![0.0; d];
            for _ in 0..count {
                rng.fill_uniform_ball(spec.support_radius(), &mut p);
                out.extend_from_slice(&p);
            }
        }
        ReferenceMethod::Rejection => {
            let rate = 1.0 / (spec.bound() * spec.box_volume());
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance { rate });
            }
            let mut p = vec![0.0; d];
            let half: Vec<f64> = spec.lower().iter().zip(spec.upper()).map(|(a, b)| 0.5 * (b - a)).collect();
            while out.len() < count * d {
                for i in 0..d {
                    p[i] = spec.center()[i] + half[i] * (2.0 * rng.uniform() - 1.0);
                }
                if rng.uniform() * spec.bound() < spec.eval(&p) {
                    out.extend_from_slice(&p);
                }
            }
        }
    }
    SampleCloud::from_flat(d, out)
}

/// Deterministic 1-D cloud `F^{-1}((i - 1/2)/S)`, i = 1..S.
pub fn quantile_cloud(spec: &DensitySpec, count: usize) -> Result<SampleCloud> {
    let inv = InverseCdf::new(spec)?;
    let pts = (0..count).map(|i| inv.quantile((i as f64 + 0.5) / count as f64)).collect();
    SampleCloud::from_flat(1, pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::grid::{GridFunction, GridMeta};

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn semicircle_moments() {
        let spec = DensitySpec::from_name("semicircle").unwrap();
        let cloud = reference_sampler(&spec, &mut RngStream::new(4, 0), 100_000).unwrap();
        let (m, v) = mean_var(cloud.as_flat());
        assert!(m.abs() < 0.01, "{m}");
        assert!((v - 0.25).abs() < 0.01, "{v}");
    }

    #[test]
    fn four_gaussian_proportions() {
        let spec = DensitySpec::from_name("four-gaussians").unwrap();
        let n = 100_000;
        let cloud = reference_sampler(&spec, &mut RngStream::new(6, 0), n).unwrap();
        let mut counts = [0usize; 4];
        for p in cloud.iter() {
            counts[(p[0] > 0.5) as usize * 2 + (p[1] > 0.5) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn rejection_matches_quadrature_mean() {
        let spec = DensitySpec::from_name("gelman-meng").unwrap();
        let cloud = reference_sampler(&spec, &mut RngStream::new(8, 0), 40_000).unwrap();
        let m = cloud.mean();
        let lo = [spec.lower()[0], spec.lower()[1]];
        let hi = [spec.upper()[0], spec.upper()[1]];
        let want = crate::metrics::quadrature::simpson_2d(|a, b| a * spec.eval(&[a, b]), lo, hi, 800);
        // sd of x1 is below 2, so 4 sd / sqrt(n) < 0.04
        assert!((m[0] - want).abs() < 0.04, "{} vs {want}", m[0]);
    }

    #[test]
    fn low_acceptance_is_reported() {
        // a single spike of mass h^2 = 2.5e-5 on the unit square
        let meta = GridMeta { min: vec![0.0, 0.0], max: vec![1.0, 1.0], shape: vec![201, 201] };
        let mut values = vec![0.0; 201 * 201];
        values[100 * 201 + 100] = 1.0;
        let spec = DensitySpec::tabulated(GridFunction::new(meta, values).unwrap()).unwrap();
        match reference_sampler(&spec, &mut RngStream::new(1, 0), 10) {
            Err(Error::LowAcceptance { rate }) => assert!(rate < 1e-4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantiles_of_uniform_ball() {
        let spec = DensitySpec::from_name("ball:1:2").unwrap();
        let q = quantile_cloud(&spec, 4).unwrap();
        let want = [-1.5, -0.5, 0.5, 1.5];
        for (a, b) in q.as_flat().iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let inv = InverseCdf::new(&spec).unwrap();
        assert!((inv.cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn seeded_reference_is_reproducible() {
        let spec = DensitySpec::from_name("banana:0.5").unwrap();
        let a = reference_sampler(&spec, &mut RngStream::new(10, 2), 500).unwrap();
        let b = reference_sampler(&spec, &mut RngStream::new(10, 2), 500).unwrap();
        assert_eq!(a, b);
    }
}
