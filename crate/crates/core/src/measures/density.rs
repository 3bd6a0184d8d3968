//! Registry of compactly supported target densities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::grid::GridFunction;
use crate::metrics::quadrature::{simpson, simpson_2d};

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Piecewise Gaussian with a jump at 0.5.
    Discontinuous,
    /// Three triangles on [0.1, 0.9] with weights 50/50/200.
    Triangles,
    /// Semicircle law on [-1, 1].
    Semicircle,
    /// `1 + (sin 2 pi x + sin 4 pi x)/2` on [0, 1].
    Sine,
    /// Griewank-shaped density on the unit square.
    Griewank2d,
    /// Four equal Gaussian bumps at the corners of [0.2, 0.8]^2.
    FourGaussians,
    /// Conditionally Gaussian density on [-2, 7]^2.
    GelmanMeng,
    /// Banana-shaped density truncated to [-6, 6]^2.
    Banana { alpha: f64 },
    /// Uniform density on the centered ball.
    Ball { dim: usize, radius: f64 },
    /// 1-D tent of half-width `half_width` at `center`.
    Triangle { center: f64, half_width: f64 },
    Tabulated(Arc<GridFunction>),
}

/// Registry names accepted by [`DensitySpec::from_name`].
pub const DENSITY_NAMES: &[&str] = &[
    "discontinuous",
    "triangles",
    "semicircle",
    "sine",
    "griewank-2d",
    "four-gaussians",
    "gelman-meng",
    "banana[:ALPHA]",
    "ball:DIM:RADIUS",
    "triangle:CENTER:HALF_WIDTH",
];

/// A nonnegative density with bounded support.
///
/// `eval` returns the normalized value; it vanishes outside the support box
/// `[lo, hi]`, which sits inside the ball of radius `support_radius` around
/// `center`.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    kind: DensityKind,
    lo: Vec<f64>,
    hi: Vec<f64>,
    center: Vec<f64>,
    support_radius: f64,
    norm: f64,
    bound: f64,
}

impl DensitySpec {
    pub fn new(kind: DensityKind) -> Result<Self> {
        let (lo, hi) = match &kind {
            DensityKind::Discontinuous => (vec![-2.5], vec![10.0]),
            DensityKind::Triangles => (vec![0.1], vec![0.9]),
            DensityKind::Semicircle => (vec![-1.0], vec![1.0]),
            DensityKind::Sine => (vec![0.0], vec![1.0]),
            DensityKind::Griewank2d | DensityKind::FourGaussians => (vec![0.0; 2], vec![1.0; 2]),
            DensityKind::GelmanMeng => (vec![-2.0; 2], vec![7.0; 2]),
            DensityKind::Banana { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::invalid("banana alpha must be finite"));
                }
                (vec![-6.0; 2], vec![6.0; 2])
            }
            DensityKind::Ball { dim, radius } => {
                if *dim == 0 || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("ball needs dim >= 1 and radius > 0"));
                }
                (vec![-radius; *dim], vec![*radius; *dim])
            }
            DensityKind::Triangle { center, half_width } => {
                if !(*half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
                    return Err(Error::invalid("triangle needs a finite center and half_width > 0"));
                }
                (vec![center - half_width], vec![center + half_width])
            }
            DensityKind::Tabulated(g) => (g.meta().min.clone(), g.meta().max.clone()),
        };
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let support_radius = match &kind {
            DensityKind::Ball { radius, .. } => *radius,
            _ => lo.iter().zip(&hi).map(|(a, b)| (0.5 * (b - a)).powi(2)).sum::<f64>().sqrt(),
        };
        let mut spec = Self { kind, lo, hi, center, support_radius, norm: 1.0, bound: 0.0 };
        let (mass, max) = spec.raw_mass_and_max();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("density has no mass on its support"));
        }
        spec.norm = match &spec.kind {
            DensityKind::Discontinuous | DensityKind::Triangles | DensityKind::Semicircle | DensityKind::Sine => 1.0,
            _ => 1.0 / mass,
        };
        spec.bound = spec.norm * max;
        Ok(spec)
    }

    pub fn tabulated(grid: GridFunction) -> Result<Self> {
        Self::new(DensityKind::Tabulated(Arc::new(grid)))
    }

    /// Looks up a registry entry such as `semicircle` or `banana:0.5`.
    pub fn from_name(name: &str) -> Result<Self> {
        name.parse::<DensityKind>().and_then(Self::new)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    /// Center `c` of the support ball.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `K`: radius of the ball around `center` containing the support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `Lambda`: upper bound on the normalized density.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Multiplier turning the raw registry formula into a probability density.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn box_volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Normalized density at `x`; zero off the support.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        if !self.contains(x) {
            return 0.0;
        }
        self.norm * self.raw(x)
    }

    /// Unnormalized registry formula inside the support box.
    fn raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Discontinuous => {
                let v = x[0];
                let num = if v <= 0.5 { 1.2 * (-2.0 * v * v).exp() } else { 2.0 * (-(v - 1.0).powi(2) / 8.0).exp() };
                num / (2.8996 * (2.0 * PI).sqrt())
            }
            DensityKind::Triangles => {
                let v = x[0];
                let tent = |lo: f64, mid: f64, hi: f64| {
                    if v > lo && v < mid {
                        v - lo
                    } else if v >= mid && v < hi {
                        hi - v
                    } else {
                        0.0
                    }
                };
                (200.0 * tent(0.7, 0.8, 0.9) + 50.0 * tent(0.4, 0.5, 0.6) + 50.0 * tent(0.1, 0.2, 0.3)) / 3.0
            }
            DensityKind::Semicircle => 2.0 / PI * (1.0 - x[0] * x[0]).max(0.0).sqrt(),
            DensityKind::Sine => 1.0 + ((2.0 * PI * x[0]).sin() + (4.0 * PI * x[0]).sin()) / 2.0,
            DensityKind::Griewank2d => {
                (x[0] * x[0] + x[1] * x[1]) / 4000.0 - x[0].cos() * (x[1] * FRAC_1_SQRT_2).cos() + 1.0
            }
            DensityKind::FourGaussians => {
                let bump = |c0: f64, c1: f64| (-((x[0] - c0).powi(2) + (x[1] - c1).powi(2)) / 0.01).exp();
                bump(0.8, 0.8) + bump(0.2, 0.2) + bump(0.8, 0.2) + bump(0.2, 0.8)
            }
            DensityKind::GelmanMeng => {
                let (a, b) = (x[0], x[1]);
                (-((a * b).powi(2) + a * a + b * b - 8.0 * (a + b)) / 2.0).exp()
            }
            DensityKind::Banana { alpha } => {
                let (a, b) = (x[0], x[1]);
                (-(a * a + (b - alpha * (a * a - 1.0)).powi(2)) / 2.0).exp()
            }
            DensityKind::Ball { radius, .. } => {
                if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            DensityKind::Triangle { center, half_width } => {
                (1.0 - (x[0] - center).abs() / half_width).max(0.0) / half_width
            }
            DensityKind::Tabulated(g) => g.interpolate_clamped(x).max(0.0),
        }
    }

    /// Total raw mass on the support box and the largest raw value seen.
    fn raw_mass_and_max(&self) -> (f64, f64) {
        match &self.kind {
            DensityKind::Ball { dim, radius } => (ball_volume(*dim, *radius), 1.0),
            DensityKind::Triangle { half_width, .. } => (1.0, 1.0 / half_width),
            DensityKind::Tabulated(g) => (grid_trapezoid_mass(g), g.max_value()),
            _ if self.dim() == 1 => {
                let (a, b) = (self.lo[0], self.hi[0]);
                let mass = simpson(|v| self.raw(&[v]), a, b, 20_000);
                let max = grid_max(20_000, |u| self.raw(&[a + u * (b - a)]));
                // slack for a peak between grid nodes
                (mass, max * 1.01)
            }
            _ => {
                let (lo, hi) = ([self.lo[0], self.lo[1]], [self.hi[0], self.hi[1]]);
                let mass = simpson_2d(|a, b| self.raw(&[a, b]), lo, hi, 1000);
                let n = 600;
                let mut max: f64 = 0.0;
                for i in 0..=n {
                    let a = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
                    for j in 0..=n {
                        let b = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
                        max = max.max(self.raw(&[a, b]));
                    }
                }
                (mass, max * 1.05)
            }
        }
    }
}

fn grid_max(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..=n).map(|i| f(i as f64 / n as f64)).fold(0.0, f64::max)
}

/// Exact integral of the multilinear interpolant: product trapezoid rule.
fn grid_trapezoid_mass(g: &GridFunction) -> f64 {
    let meta = g.meta();
    let d = g.dim();
    let total: usize = meta.shape.iter().product();
    let cell: f64 = (0..d).map(|a| (meta.max[a] - meta.min[a]) / (meta.shape[a] - 1) as f64).product();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..total {
        let mut w = 1.0;
        for a in 0..d {
            let n = meta.shape[a];
            x[a] = meta.min[a] + (meta.max[a] - meta.min[a]) * idx[a] as f64 / (n - 1) as f64;
            if idx[a] == 0 || idx[a] == n - 1 {
                w *= 0.5;
            }
        }
        acc += w * g.interpolate_clamped(&x);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < meta.shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    acc * cell
}

/// Volume of the Euclidean ball of radius `r` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let half = d as f64 / 2.0;
    (half * PI.ln() - crate::metrics::special::ln_gamma(half + 1.0) + d as f64 * r.ln()).exp()
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::invalid(format!("density `{s}` is missing a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number in density `{s}`")))
        };
        let arity = |n: usize| -> Result<()> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("density `{s}` takes {} parameter(s)", n - 1)))
            }
        };
        let kind = match parts[0] {
            "discontinuous" => DensityKind::Discontinuous,
            "triangles" => DensityKind::Triangles,
            "semicircle" => DensityKind::Semicircle,
            "sine" => DensityKind::Sine,
            "griewank-2d" => DensityKind::Griewank2d,
            "four-gaussians" => DensityKind::FourGaussians,
            "gelman-meng" => DensityKind::GelmanMeng,
            "banana" if parts.len() == 1 => return Ok(DensityKind::Banana { alpha: 1.0 }),
            "banana" => {
                arity(2)?;
                return Ok(DensityKind::Banana { alpha: num(1)? });
            }
            "ball" => {
                arity(3)?;
                let dim = num(1)?;
                if dim < 1.0 || dim.fract() != 0.0 {
                    return Err(Error::invalid("ball dimension must be a positive integer"));
                }
                return Ok(DensityKind::Ball { dim: dim as usize, radius: num(2)? });
            }
            "triangle" => {
                arity(3)?;
                return Ok(DensityKind::Triangle { center: num(1)?, half_width: num(2)? });
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown density `{other}`; known: {}",
                    DENSITY_NAMES.join(", ")
                )))
            }
        };
        arity(1)?;
        Ok(kind)
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::Discontinuous => write!(f, "discontinuous"),
            DensityKind::Triangles => write!(f, "triangles"),
            DensityKind::Semicircle => write!(f, "semicircle"),
            DensityKind::Sine => write!(f, "sine"),
            DensityKind::Griewank2d => write!(f, "griewank-2d"),
            DensityKind::FourGaussians => write!(f, "four-gaussians"),
            DensityKind::GelmanMeng => write!(f, "gelman-meng"),
            DensityKind::Banana { alpha } => write!(f, "banana:{alpha}"),
            DensityKind::Ball { dim, radius } => write!(f, "ball:{dim}:{radius}"),
            DensityKind::Triangle { center, half_width } => write!(f, "triangle:{center}:{half_width}"),
            DensityKind::Tabulated(g) => write!(f, "tabulated:{}d", g.dim()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::grid::GridMeta;

    #[test]
    fn point_values() {
        let f3 = DensitySpec::from_name("semicircle").unwrap();
        assert!((f3.eval(&[0.0]) - 2.0 / PI).abs() < 1e-15);
        let f4 = DensitySpec::from_name("sine").unwrap();
        assert!((f4.eval(&[0.25]) - 1.5).abs() < 1e-15);
        let f2 = DensitySpec::from_name("triangles").unwrap();
        assert!((f2.eval(&[0.8]) - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(f2.eval(&[0.35]), 0.0);
        assert_eq!(f3.eval(&[1.5]), 0.0);
    }

    #[test]
    fn registry_densities_have_unit_mass() {
        for name in ["discontinuous", "triangles", "semicircle", "sine"] {
            let spec = DensitySpec::from_name(name).unwrap();
            let (a, b) = (spec.lower()[0], spec.upper()[0]);
            // Independent grid so the check does not reuse the constructor's rule.
            let mass = simpson(|v| spec.eval(&[v]), a, b, 30_002);
            assert!((mass - 1.0).abs() < 1e-3, "{name}: {mass}");
        }
        for name in ["griewank-2d", "four-gaussians", "gelman-meng", "banana:0.5", "banana:1"] {
            let spec = DensitySpec::from_name(name).unwrap();
            let lo = [spec.lower()[0], spec.lower()[1]];
            let hi = [spec.upper()[0], spec.upper()[1]];
            let mass = simpson_2d(|a, b| spec.eval(&[a, b]), lo, hi, 802);
            assert!((mass - 1.0).abs() < 1e-3, "{name}: {mass}");
        }
    }

    #[test]
    fn bounds_dominate_samples_on_a_grid() {
        for name in ["discontinuous", "triangles", "semicircle", "sine"] {
            let spec = DensitySpec::from_name(name).unwrap();
            let (a, b) = (spec.lower()[0], spec.upper()[0]);
            for i in 0..=7919 {
                let v = a + (b - a) * i as f64 / 7919.0;
                assert!(spec.eval(&[v]) <= spec.bound(), "{name} at {v}");
            }
        }
        let spec = DensitySpec::from_name("four-gaussians").unwrap();
        assert!(spec.eval(&[0.2, 0.8]) <= spec.bound());
    }

    #[test]
    fn support_ball_contains_box() {
        for name in ["discontinuous", "sine", "gelman-meng", "banana"] {
            let spec = DensitySpec::from_name(name).unwrap();
            let corner_dist = spec
                .lower()
                .iter()
                .zip(spec.center())
                .map(|(a, c)| (a - c).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((corner_dist - spec.support_radius()).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_and_triangle_entries() {
        let ball = DensitySpec::from_name("ball:2:2").unwrap();
        assert!((ball.eval(&[0.5, 0.5]) - 1.0 / (4.0 * PI)).abs() < 1e-14);
        assert_eq!(ball.eval(&[1.9, 1.9]), 0.0);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * PI).abs() < 1e-13);
        let tri = DensitySpec::from_name("triangle:0.3:0.005").unwrap();
        assert!((tri.eval(&[0.3]) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn parse_errors() {
        assert!(DensitySpec::from_name("nope").is_err());
        assert!(DensitySpec::from_name("semicircle:1").is_err());
        assert!(DensitySpec::from_name("ball:2").is_err());
        assert!(DensitySpec::from_name("ball:0:1").is_err());
        assert!(DensitySpec::from_name("triangle:0:-1").is_err());
        let k: DensityKind = "banana:0.5".parse().unwrap();
        assert_eq!(k.to_string().parse::<DensityKind>().unwrap(), k);
    }

    #[test]
    fn tabulated_normalizes_exactly() {
        let meta = GridMeta { min: vec![0.0, 0.0], max: vec![2.0, 1.0], shape: vec![3, 2] };
        let grid = GridFunction::new(meta, vec![1.0, 1.0, 3.0, 3.0, 1.0, 1.0]).unwrap();
        let spec = DensitySpec::tabulated(grid).unwrap();
        // raw mass 4: a 1-3-1 tent over [0,2] times unit width
        let mass = simpson_2d(|a, b| spec.eval(&[a, b]), [0.0, 0.0], [2.0, 1.0], 200);
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
        assert!((spec.bound() - 0.75).abs() < 1e-15);
    }
}
