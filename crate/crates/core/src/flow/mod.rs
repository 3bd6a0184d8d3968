//! Fixed-grid Euler integration of the probability-flow ODE.

mod batch;
mod density;
mod exact;
mod study;

pub use batch::{run_batch, BatchOutput, MeasureSource};
pub use exact::empirical_flow_rk4;
pub use density::{euler_sample_density, euler_sample_funnel, DensitySampler, SupportMap};
pub use study::{particle_rate_study, RateRow, RateStudyConfig, RateStudyResult};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drift::{EmpiricalDrift, SoftmaxAccumulator, WeightDiagnostics};
use crate::error::{Error, Result};
use crate::measures::{Dataset, RngStream};
use crate::schedule::{Schedule, ScheduleValue, TimeGrid};

/// Drift estimator for density targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Uniform proposals in the scaled support ball.
    Ball,
    /// Gaussian proposals pulled back through the flow map.
    Normal,
}

/// When density-mode proposal clouds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudPolicy {
    /// Every trajectory draws its own cloud at every step.
    FreshPerTrajectory,
    /// One cloud per step, shared by all trajectories of a batch.
    SharedPerStep,
    /// One cloud for the whole batch.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Euler steps `M`.
    pub steps: usize,
    pub schedule: Schedule,
    /// Project `Y0` onto the sphere `|Y0|^2 = d`.
    pub normalize_init: bool,
    pub record_trajectory: bool,
    pub record_diagnostics: bool,
    /// Proposal points `n` per drift evaluation (density and funnel modes).
    pub mc_points: usize,
    /// Support scale `eps` in `(0, 1]` (density mode).
    pub scale: f64,
    pub estimator: Estimator,
    pub cloud_policy: CloudPolicy,
    /// Stop after this many steps instead of `steps`.
    pub stop_step: Option<usize>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            schedule: Schedule::linear(),
            normalize_init: true,
            record_trajectory: false,
            record_diagnostics: false,
            mc_points: 20_000,
            scale: 1.0,
            estimator: Estimator::Ball,
            cloud_policy: CloudPolicy::FreshPerTrajectory,
            stop_step: None,
        }
    }
}

impl FlowConfig {
    /// Defaults for dataset generation (normalized start).
    pub fn generation(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }

    /// Defaults for density sampling (plain Gaussian start).
    pub fn density(steps: usize, mc_points: usize, scale: f64) -> Self {
        Self { steps, mc_points, scale, normalize_init: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::invalid(format!("scale must lie in (0, 1], got {}", self.scale)));
        }
        if self.mc_points == 0 {
            return Err(Error::invalid("mc_points must be at least 1"));
        }
        if let Some(s) = self.stop_step {
            if s > self.steps {
                return Err(Error::invalid(format!("stop_step {s} exceeds steps {}", self.steps)));
            }
        }
        Ok(())
    }

    /// Number of Euler updates actually performed.
    pub fn active_steps(&self) -> usize {
        self.stop_step.unwrap_or(self.steps)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.schedule.grid(self.steps)
    }
}

/// One integrated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    /// Times of the recorded states (the last one is the end of the run).
    pub nodes: Vec<f64>,
    /// Row-major states `Y_0 .. Y_K` when recording, else `Y_0` and `Y_K`.
    pub states: Vec<f64>,
    pub diagnostics: Vec<WeightDiagnostics>,
    /// Final state in the target's coordinates.
    pub output: Vec<f64>,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.states[..self.dim]
    }

    pub fn last(&self) -> &[f64] {
        &self.states[self.states.len() - self.dim..]
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }
}

/// `Y0 ~ N(0, I_d)`, optionally rescaled to `|Y0|_2 = sqrt d`.
pub fn initial_state(d: usize, normalize: bool, rng: &mut RngStream) -> Vec<f64> {
    let mut y = rng.standard_normal(d);
    if normalize {
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            let s = (d as f64).sqrt() / n;
            y.iter_mut().for_each(|v| *v *= s);
        }
    }
    y
}

/// Euler coefficient `c_k` in `Y_{k+1} = Y_k + c_k (Y_k - D_k)`.
///
/// For the linear schedule `h (log sigma)'(t_k) = -1/(M - k)`, used in that
/// closed form so the final step lands exactly on `D`.
pub fn euler_coefficient(schedule: &Schedule, grid: &TimeGrid, k: usize, sv: &ScheduleValue) -> f64 {
    if schedule.is_linear() {
        -1.0 / (grid.steps() - k) as f64
    } else {
        grid.step() * sv.dlog_sigma
    }
}

/// Integrates from `y0` with a caller-supplied drift.
///
/// `drift(k, sv, y, out)` writes `D_{t_k}(y)` into `out`. `map_output`
/// turns the final working state into the returned sample.
pub fn integrate<F>(
    y0: Vec<f64>,
    cfg: &FlowConfig,
    mut drift: F,
    map_output: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Trajectory>
where
    F: FnMut(usize, &ScheduleValue, &[f64], &mut [f64]) -> Result<WeightDiagnostics>,
{
    cfg.validate()?;
    let grid = cfg.grid()?;
    let d = y0.len();
    let stop = cfg.active_steps();
    let horizon = cfg.schedule.horizon();
    let mut y = y0;
    let mut nodes = vec![0.0];
    let mut states = y.clone();
    let mut diagnostics = Vec::new();
    let mut dvec = vec![0.0; d];
    for k in 0..stop {
        let t = grid.nodes()[k];
        let sv = cfg.schedule.evaluate(t)?;
        let diag = drift(k, &sv, &y, &mut dvec)?;
        let c = euler_coefficient(&cfg.schedule, &grid, k, &sv);
        for (yi, di) in y.iter_mut().zip(&dvec) {
            *yi += c * (*yi - di);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        if cfg.record_diagnostics {
            diagnostics.push(diag);
        }
        if cfg.record_trajectory {
            nodes.push(horizon * (k + 1) as f64 / grid.steps() as f64);
            states.extend_from_slice(&y);
        }
    }
    if !cfg.record_trajectory {
        nodes.push(horizon * stop as f64 / grid.steps() as f64);
        states.extend_from_slice(&y);
    }
    let output = map_output(&y);
    Ok(Trajectory { dim: d, nodes, states, diagnostics, output })
}

/// Dataset generation: Euler flow driven by the empirical drift.
pub fn euler_generate(data: &Arc<Dataset>, cfg: &FlowConfig, rng: &mut RngStream) -> Result<Trajectory> {
    let y0 = initial_state(data.dim(), cfg.normalize_init, rng);
    euler_generate_from(data, cfg, y0)
}

/// As [`euler_generate`] with a given starting point.
pub fn euler_generate_from(data: &Arc<Dataset>, cfg: &FlowConfig, y0: Vec<f64>) -> Result<Trajectory> {
    if y0.len() != data.dim() {
        return Err(Error::invalid("start point and dataset dimensions differ"));
    }
    let ev = EmpiricalDrift::new(data.clone(), cfg.schedule)?;
    let mut acc = SoftmaxAccumulator::new(data.dim());
    integrate(y0, cfg, |_, sv, y, out| Ok(ev.mean_at(sv, y, &mut acc, out)), |y| y.to_vec())
}

/// Closed-form flow for a point mass at `a`: `sigma(t) y0 + beta(t) a`.
pub fn exact_singleton_solution(schedule: &Schedule, a: &[f64], y0: &[f64], t: f64) -> Vec<f64> {
    let s = if t >= schedule.terminal() { 0.0 } else { schedule.sigma(t) };
    let b = 1.0 - s;
    y0.iter().zip(a).map(|(y, p)| s * y + b * p).collect()
}
