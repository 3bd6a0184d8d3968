use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{euler_generate_from, initial_state, FlowConfig};
use crate::measures::{Dataset, RngStream};
use crate::metrics::{loglog_slope, particle_error_bound, particle_error_bound_sharp};

/// Particle-rate experiment: how far the flow of `N` samples from a
/// uniform ball law drifts from the flow of the law itself.
///
/// The law's flow is approximated by a much larger reference sample, and
/// both flows share their start point and Euler grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub dim: usize,
    /// Radius `K` of the uniform ball law.
    pub radius: f64,
    pub steps: usize,
    /// Step at which the two states are compared.
    pub read_step: usize,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub starts_per_rep: usize,
    pub n_ref: usize,
    pub seed: u64,
}

impl Default for RateStudyConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            radius: 0.5,
            steps: 50,
            read_step: 40,
            n_values: vec![100, 400, 1600, 6400],
            reps: 50,
            starts_per_rep: 4,
            n_ref: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_error: f64,
    /// Standard error of `mean_error` across repetitions.
    pub std_error: f64,
    pub bound: f64,
    pub sharp_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    /// Time of comparison.
    pub t: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln mean_error` against `ln N`.
    pub slope: f64,
}

pub fn particle_rate_study(cfg: &RateStudyConfig) -> Result<RateStudyResult> {
    let n_max = cfg.n_values.iter().copied().max().unwrap_or(0);
    if n_max == 0 || cfg.reps == 0 || cfg.starts_per_rep == 0 || cfg.n_ref == 0 {
        return Err(Error::invalid("rate study needs nonempty sizes, repetitions and starts"));
    }
    if cfg.n_ref <= n_max {
        return Err(Error::invalid("n_ref must exceed every particle count"));
    }
    if cfg.read_step == 0 || cfg.read_step >= cfg.steps {
        return Err(Error::invalid("read_step must lie strictly between 0 and steps"));
    }
    let flow = FlowConfig { stop_step: Some(cfg.read_step), normalize_init: false, ..FlowConfig::generation(cfg.steps) };
    let t = cfg.read_step as f64 / cfg.steps as f64;
    let sv = flow.schedule.evaluate(t)?;

    let per_rep: Vec<Vec<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = RngStream::new(cfg.seed, r as u64);
            let mut draw = |n: usize| -> Result<Arc<Dataset>> {
                let mut flat = vec![0.0; n * cfg.dim];
                for p in flat.chunks_exact_mut(cfg.dim) {
                    rng.fill_uniform_ball(cfg.radius, p);
                }
                Ok(Arc::new(Dataset::from_flat(cfg.dim, flat)?))
            };
            let reference = draw(cfg.n_ref)?;
            let particles = draw(n_max)?;
            let subsets: Vec<Arc<Dataset>> =
                cfg.n_values.iter().map(|&n| particles.prefix(n).map(Arc::new)).collect::<Result<_>>()?;
            let mut errors = vec![0.0; cfg.n_values.len()];
            for _ in 0..cfg.starts_per_rep {
                let y0 = initial_state(cfg.dim, false, &mut rng);
                let want = euler_generate_from(&reference, &flow, y0.clone())?;
                for (e, sub) in errors.iter_mut().zip(&subsets) {
                    let got = euler_generate_from(sub, &flow, y0.clone())?;
                    *e += got.output.iter().zip(&want.output).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                }
            }
            errors.iter_mut().for_each(|e| *e /= cfg.starts_per_rep as f64);
            Ok(errors)
        })
        .collect::<Result<_>>()?;

    let reps = cfg.reps as f64;
    let rows: Vec<RateRow> = cfg
        .n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mean = per_rep.iter().map(|e| e[i]).sum::<f64>() / reps;
            let var = per_rep.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (reps - 1.0).max(1.0);
            RateRow {
                n,
                mean_error: mean,
                std_error: (var / reps).sqrt(),
                bound: particle_error_bound(cfg.radius, sv.sigma, sv.beta, n),
                sharp_bound: particle_error_bound_sharp(cfg.radius, sv.sigma, sv.beta, n),
            }
        })
        .collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    Ok(RateStudyResult { t, slope: loglog_slope(&ns, &es), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_decreases() {
        let cfg = RateStudyConfig {
            n_values: vec![20, 320],
            reps: 12,
            starts_per_rep: 2,
            n_ref: 5000,
            steps: 20,
            read_step: 16,
            ..RateStudyConfig::default()
        };
        let res = particle_rate_study(&cfg).unwrap();
        assert!((res.t - 0.8).abs() < 1e-15);
        assert!(res.rows[1].mean_error < res.rows[0].mean_error);
        assert!(res.rows.iter().all(|r| r.mean_error < r.bound));
        assert!(particle_rate_study(&RateStudyConfig { read_step: 20, ..cfg.clone() }).is_err());
        assert!(particle_rate_study(&RateStudyConfig { n_ref: 320, ..cfg }).is_err());
    }
}
