use crate::drift::kernel::{softmax_mean_columns, KernelScratch};
use crate::drift::{SoftmaxAccumulator, WeightDiagnostics};
use crate::error::{Error, Result};
use crate::measures::{DensitySpec, RngStream};
use crate::schedule::{Schedule, ScheduleValue};

/// Number of fresh draws attempted before giving up on a cloud whose
/// density values are all zero.
pub const RESAMPLE_LIMIT: usize = 8;

/// Monte-Carlo proposal points `xi_j` with log density values.
///
/// Only points with positive density are kept. Log values are stored
/// relative to the largest one, so multiplying every density value by a
/// power of two leaves the cloud bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalCloud {
    dim: usize,
    points: Vec<f64>,
    columns: Vec<f64>,
    log_f: Vec<f64>,
    drawn: usize,
}

fn transpose(dim: usize, points: &[f64]) -> Vec<f64> {
    let n = points.len() / dim;
    let mut cols = vec![0.0; points.len()];
    for (j, p) in points.chunks_exact(dim).enumerate() {
        for (i, v) in p.iter().enumerate() {
            cols[i * n + j] = *v;
        }
    }
    cols
}

impl ProposalCloud {
    /// Cloud from explicit points and nonnegative density values.
    pub fn new(dim: usize, points: &[f64], f_values: &[f64]) -> Result<Self> {
        if dim == 0 || points.len() != dim * f_values.len() {
            return Err(Error::invalid("cloud points and density values disagree"));
        }
        if f_values.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
            return Err(Error::invalid("density values must be finite and nonnegative"));
        }
        let fmax = f_values.iter().cloned().fold(0.0, f64::max);
        if fmax <= 0.0 {
            return Err(Error::invalid("every density value in the cloud is zero"));
        }
        let mut kept = Vec::new();
        let mut log_f = Vec::new();
        for (p, f) in points.chunks_exact(dim).zip(f_values) {
            if *f > 0.0 {
                kept.extend_from_slice(p);
                log_f.push((f / fmax).ln());
            }
        }
        Ok(Self { dim, columns: transpose(dim, &kept), points: kept, log_f, drawn: f_values.len() })
    }

    /// Cloud from log weights; `-inf` entries are dropped.
    pub fn from_log_weights(dim: usize, points: &[f64], log_w: &[f64]) -> Result<Self> {
        if dim == 0 || points.len() != dim * log_w.len() {
            return Err(Error::invalid("cloud points and log weights disagree"));
        }
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::invalid("cloud log weights have no finite maximum"));
        }
        let mut kept = Vec::new();
        let mut log_f = Vec::new();
        for (p, l) in points.chunks_exact(dim).zip(log_w) {
            if l.is_nan() {
                return Err(Error::invalid("NaN log weight"));
            }
            if *l > f64::NEG_INFINITY {
                kept.extend_from_slice(p);
                log_f.push(l - max);
            }
        }
        if log_f.is_empty() {
            return Err(Error::invalid("cloud has no point with positive weight"));
        }
        Ok(Self { dim, columns: transpose(dim, &kept), points: kept, log_f, drawn: log_w.len() })
    }

    /// `n` uniform points in the centered ball of radius `radius`, weighted
    /// by `f`; redrawn up to [`RESAMPLE_LIMIT`] times while `f` vanishes on
    /// all of them.
    pub fn draw_ball(dim: usize, radius: f64, n: usize, rng: &mut RngStream, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::draw_with(dim, n, rng, f, |rng, out| rng.fill_uniform_ball(radius, out))
    }

    /// `n` uniform points in the cube `center +- half_width`, weighted by `f`.
    pub fn draw_cube(center: &[f64], half_width: f64, n: usize, rng: &mut RngStream, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::draw_with(center.len(), n, rng, f, |rng, out| rng.fill_uniform_cube(center, half_width, out))
    }

    fn draw_with(
        dim: usize,
        n: usize,
        rng: &mut RngStream,
        f: impl Fn(&[f64]) -> f64,
        mut draw: impl FnMut(&mut RngStream, &mut [f64]),
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cloud needs at least one point"));
        }
        let mut points = vec![0.0; n * dim];
        let mut values = vec![0.0; n];
        for _ in 0..RESAMPLE_LIMIT {
            for (p, v) in points.chunks_exact_mut(dim).zip(values.iter_mut()) {
                draw(rng, p);
                *v = f(p);
            }
            if values.iter().any(|v| *v > 0.0) {
                return Self::new(dim, &points, &values);
            }
        }
        Err(Error::ResamplingExhausted {
            attempts: RESAMPLE_LIMIT,
            detail: format!("density vanished on all {n} proposal points"),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points with positive density.
    pub fn len(&self) -> usize {
        self.log_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_f.is_empty()
    }

    /// Points drawn, including those with zero density.
    pub fn drawn(&self) -> usize {
        self.drawn
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_f
    }
}

/// Monte-Carlo drift `sum_j xi_j e^{-Gamma(x, xi_j)} f(xi_j) / sum_j (...)`.
pub fn density_drift_mc(
    cloud: &ProposalCloud,
    sv: &ScheduleValue,
    x: &[f64],
    scratch: &mut KernelScratch,
    out: &mut [f64],
) -> WeightDiagnostics {
    let inv = 1.0 / (2.0 * sv.sigma * sv.sigma);
    softmax_mean_columns(&cloud.columns, &cloud.log_f, x, sv.beta, inv, scratch, out)
        .expect("a cloud always keeps at least one point")
}

/// Gaussian-proposal estimate of `D` for an unnormalized density `f`:
/// with `xi' ~ N(0, I)` and `theta = (x - sigma xi') / beta`,
/// `D = E[theta f(theta)] / E f(theta)`.
pub fn normal_proposal_mean(
    sv: &ScheduleValue,
    x: &[f64],
    n: usize,
    rng: &mut RngStream,
    f: impl Fn(&[f64]) -> f64,
    out: &mut [f64],
) -> Result<WeightDiagnostics> {
    if sv.beta <= 0.0 {
        return Err(Error::Domain("the normal-proposal estimator needs beta > 0".into()));
    }
    let d = x.len();
    let mut acc = SoftmaxAccumulator::new(d);
    let mut theta = vec![0.0; d];
    for _ in 0..RESAMPLE_LIMIT {
        acc.reset();
        for _ in 0..n {
            for (th, xi) in theta.iter_mut().zip(x) {
                *th = (xi - sv.sigma * rng.normal()) / sv.beta;
            }
            let v = f(&theta);
            acc.push(&theta, if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
        }
        if let Some(diag) = acc.finish(out) {
            return Ok(diag);
        }
    }
    Err(Error::ResamplingExhausted {
        attempts: RESAMPLE_LIMIT,
        detail: format!("density vanished on all {n} Gaussian proposals"),
    })
}

/// Drift estimator built on Gaussian proposals, see [`normal_proposal_mean`].
#[derive(Debug, Clone)]
pub struct NormalProposalDrift {
    spec: DensitySpec,
    schedule: Schedule,
    n: usize,
}

impl NormalProposalDrift {
    pub fn new(spec: DensitySpec, schedule: Schedule, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one proposal"));
        }
        Ok(Self { spec, schedule, n })
    }

    pub fn drift(&self, t: f64, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let sv = self.schedule.evaluate(t)?;
        let mut out = vec![0.0; x.len()];
        self.drift_at(&sv, x, rng, &mut out)?;
        Ok(out)
    }

    pub fn drift_at(&self, sv: &ScheduleValue, x: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Result<WeightDiagnostics> {
        let d = self.spec.dim();
        if x.len() != d {
            return Err(Error::invalid(format!("point has dimension {} but density has {d}", x.len())));
        }
        normal_proposal_mean(sv, x, self.n, rng, |p| self.spec.eval(p), out)
    }

    /// `b_t(x)` estimated with fresh proposals.
    pub fn velocity(&self, t: f64, x: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let sv = self.schedule.evaluate(t)?;
        let d = self.drift(t, x, rng)?;
        Ok(x.iter().zip(&d).map(|(a, b)| sv.dlog_sigma * (a - b)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::quadrature::trapezoid;

    fn linear(t: f64) -> ScheduleValue {
        Schedule::linear().evaluate(t).unwrap()
    }

    fn mc(cloud: &ProposalCloud, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        density_drift_mc(cloud, &linear(t), x, &mut KernelScratch::new(), &mut out);
        out
    }

    /// `D_t(x)` for a 1-D density by trapezoid quadrature on `[a, b]`.
    fn quadrature_drift(spec: &DensitySpec, t: f64, x: f64) -> f64 {
        let sv = linear(t);
        let (a, b) = (spec.lower()[0], spec.upper()[0]);
        let w = |y: f64| (-(x - sv.beta * y).powi(2) / (2.0 * sv.sigma * sv.sigma)).exp() * spec.eval(&[y]);
        trapezoid(|y| y * w(y), a, b, 10_000) / trapezoid(w, a, b, 10_000)
    }

    #[test]
    fn hand_examples() {
        let sym = ProposalCloud::new(1, &[-0.4, 0.4], &[1.0, 1.0]).unwrap();
        assert_eq!(mc(&sym, 0.3, &[0.0]), vec![0.0]);
        let one = ProposalCloud::new(1, &[0.2, 0.8], &[0.0, 1.0]).unwrap();
        for &(t, x) in &[(0.0, -3.0), (0.5, 0.1), (0.95, 2.0)] {
            assert_eq!(mc(&one, t, &[x]), vec![0.8]);
        }
        assert_eq!((one.len(), one.drawn()), (1, 2));
        assert!(ProposalCloud::new(1, &[0.1], &[0.0]).is_err());
    }

    #[test]
    fn power_of_two_scaling_is_bit_identical() {
        let mut rng = RngStream::new(1, 0);
        let pts: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
        let f: Vec<f64> = pts.iter().map(|p| 1.0 + (7.0 * p).sin()).collect();
        let a = ProposalCloud::new(1, &pts, &f).unwrap();
        for c in [0.25, 8.0, 2f64.powi(40)] {
            let scaled: Vec<f64> = f.iter().map(|v| v * c).collect();
            let b = ProposalCloud::new(1, &pts, &scaled).unwrap();
            assert_eq!(mc(&a, 0.6, &[0.3]), mc(&b, 0.6, &[0.3]));
        }
        for c in [3.0, 1e-7, 12345.678] {
            let scaled: Vec<f64> = f.iter().map(|v| v * c).collect();
            let b = ProposalCloud::new(1, &pts, &scaled).unwrap();
            assert!((mc(&a, 0.6, &[0.3])[0] - mc(&b, 0.6, &[0.3])[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_density_matches_quadrature() {
        let spec = DensitySpec::from_name("sine").unwrap();
        let mut rng = RngStream::new(12, 0);
        let cloud = ProposalCloud::draw_cube(&[0.5], 0.5, 50_000, &mut rng, |p| spec.eval(p)).unwrap();
        let want = quadrature_drift(&spec, 0.5, 0.3);
        let got = mc(&cloud, 0.5, &[0.3])[0];
        assert!((got - want).abs() < 0.01, "{got} vs {want}");

        let normal = NormalProposalDrift::new(spec.clone(), Schedule::linear(), 100_000).unwrap();
        let b_normal = normal.velocity(0.5, &[0.3], &mut RngStream::new(13, 0)).unwrap()[0];
        let b_quad = -(0.3 - want) / 0.5;
        assert!((b_normal - b_quad).abs() < 0.02, "{b_normal} vs {b_quad}");
        let b_mc = -(0.3 - got) / 0.5;
        assert!((b_normal - b_mc).abs() < 0.02);
    }

    #[test]
    fn normal_proposal_symmetry_and_boundedness() {
        let spec = DensitySpec::from_name("ball:1:1").unwrap();
        let est = NormalProposalDrift::new(spec, Schedule::linear(), 20_000).unwrap();
        let b = est.velocity(0.5, &[0.0], &mut RngStream::new(2, 0)).unwrap()[0];
        assert!(b.abs() < 0.05, "{b}");
        let ball = DensitySpec::from_name("ball:2:0.5").unwrap();
        let est = NormalProposalDrift::new(ball, Schedule::linear(), 2_000).unwrap();
        let mut rng = RngStream::new(3, 0);
        for t in [0.5, 0.7, 0.9, 0.99] {
            for x in [[0.1, 0.2], [-0.3, 0.0]] {
                let v = est.velocity(t, &x, &mut rng).unwrap();
                assert!(v.iter().all(|c| c.is_finite()));
            }
        }
        assert!(est.velocity(0.0, &[0.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn resampling_gives_up() {
        let mut rng = RngStream::new(4, 0);
        match ProposalCloud::draw_ball(1, 1.0, 16, &mut rng, |_| 0.0) {
            Err(Error::ResamplingExhausted { attempts, .. }) => assert_eq!(attempts, RESAMPLE_LIMIT),
            other => panic!("{other:?}"),
        }
        let tri = DensitySpec::from_name("triangle:5:0.01").unwrap();
        let est = NormalProposalDrift::new(tri, Schedule::linear(), 4).unwrap();
        assert!(matches!(est.drift(0.5, &[0.0], &mut rng), Err(Error::ResamplingExhausted { .. })));
    }
}
