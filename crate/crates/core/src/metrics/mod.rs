//! Distances between sample clouds, tail probabilities and bound calculators.

pub mod quadrature;
pub mod special;

use crate::error::{Error, Result};
use crate::measures::{Dataset, RngStream, SampleCloud};

/// Default number of projection directions for [`sliced_w2`].
pub const DEFAULT_PROJECTIONS: usize = 64;

/// Exact 1-D W1 between two equal-size clouds by sorted pairing.
pub fn wasserstein1_1d(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::invalid("wasserstein1_1d needs 1-D clouds"));
    }
    wasserstein1_sorted(a.as_flat(), b.as_flat())
}

/// W1 between two equal-size samples given as plain slices.
pub fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("cloud sizes differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    Ok(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64)
}

/// Sliced W2: root mean over random unit directions of squared 1-D W2.
///
/// Directions come from `RngStream::new(direction_seed, 0)`, so swapping
/// the arguments gives the identical value.
pub fn sliced_w2(a: &SampleCloud, b: &SampleCloud, projections: usize, direction_seed: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(format!("cloud sizes differ: {} vs {}", a.len(), b.len())));
    }
    if projections == 0 {
        return Err(Error::invalid("need at least one projection"));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let d = a.dim();
    let mut rng = RngStream::new(direction_seed, 0);
    let mut dir = vec![0.0; d];
    let mut pa = vec![0.0; a.len()];
    let mut pb = vec![0.0; b.len()];
    let mut total = 0.0;
    for _ in 0..projections {
        let norm = loop {
            rng.fill_standard_normal(&mut dir);
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                break n;
            }
        };
        dir.iter_mut().for_each(|v| *v /= norm);
        for (p, x) in pa.iter_mut().zip(a.iter()) {
            *p = dot(x, &dir);
        }
        for (p, x) in pb.iter_mut().zip(b.iter()) {
            *p = dot(x, &dir);
        }
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        total += pa.iter().zip(&pb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / pa.len() as f64;
    }
    Ok((total / projections as f64).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `min_j |x - eta_j|_1` by linear scan.
pub fn min_l1_distance(x: &[f64], data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if x.len() != data.dim() {
        return Err(Error::invalid(format!("point has dimension {} but dataset has {}", x.len(), data.dim())));
    }
    Ok(data
        .iter()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

/// Index of the dataset point nearest to `x` in l1.
pub fn nearest_l1(x: &[f64], data: &Dataset) -> Option<usize> {
    data.iter()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
}

/// `P(max_i |xi_i| >= M)` for `xi ~ N(0, I_d)`: `1 - (1 - erfc(M/sqrt 2))^d`.
pub fn tail_prob(m: f64, d: usize) -> f64 {
    let e = special::erfc(m * std::f64::consts::FRAC_1_SQRT_2);
    -(d as f64 * (-e).ln_1p()).exp_m1()
}

/// `4 int_0^inf r (1 - (1 - erfc r)^alpha) dr`, truncated at `r = 8`.
pub fn n_alpha(alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::invalid("n_alpha needs alpha >= 1"));
    }
    let integrand = |r: f64| r * -(alpha * (-special::erfc(r)).ln_1p()).exp_m1();
    Ok(4.0 * quadrature::adaptive_simpson(&integrand, 0.0, 8.0, 1e-12))
}

/// `(K + sqrt d) sigma_t`.
pub fn wasserstein_bound(k: f64, d: usize, sigma_t: f64) -> f64 {
    (k + (d as f64).sqrt()) * sigma_t
}

/// Upper bound on the q-norm of a flow state:
/// `sigma_t |Y0|_q + beta_t sup |eta|_q`.
pub fn uniform_state_bound(sigma: f64, beta: f64, y0_norm: f64, data_norm: f64) -> f64 {
    sigma * y0_norm + beta * data_norm
}

/// `(ln lower, ln upper)` for the mean weight `g_t` along an exact trajectory:
/// `-(|Y0|^2 + (K beta/sigma)^2)/2` and `-|Y0|^2/2`.
pub fn log_g_bounds(y0_sq: f64, k: f64, sigma: f64, beta: f64) -> (f64, f64) {
    let r = k * beta / sigma;
    (-(y0_sq + r * r) / 2.0, -y0_sq / 2.0)
}

/// `2 K beta e^{(K beta / sigma)^2} / sqrt N`.
pub fn particle_error_bound(k: f64, sigma: f64, beta: f64, n: usize) -> f64 {
    2.0 * k * beta * ((k * beta / sigma).powi(2)).exp() / (n as f64).sqrt()
}

/// Same rate with the smaller exponent `(K beta)^2 / (2 sigma^2)`.
pub fn particle_error_bound_sharp(k: f64, sigma: f64, beta: f64, n: usize) -> f64 {
    2.0 * k * beta * ((k * beta / sigma).powi(2) / 2.0).exp() / (n as f64).sqrt()
}

/// Tail table rows `d` and columns `M` as printed in the report.
pub const TAIL_TABLE_DIMS: [usize; 5] = [10, 100, 1000, 10_000, 100_000];
pub const TAIL_TABLE_LEVELS: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

/// `tail_prob` over the standard grid, one row per dimension.
pub fn tail_table() -> Vec<(usize, Vec<f64>)> {
    TAIL_TABLE_DIMS
        .iter()
        .map(|&d| (d, TAIL_TABLE_LEVELS.iter().map(|&m| tail_prob(m, d)).collect()))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
