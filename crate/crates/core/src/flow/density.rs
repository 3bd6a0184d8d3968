use std::sync::Arc;

use crate::drift::{density_drift_mc, normal_proposal_mean, FunnelDrift, KernelScratch, ProposalCloud, WeightDiagnostics};
use crate::error::{Error, Result};
use crate::flow::{initial_state, integrate, CloudPolicy, Estimator, FlowConfig, Trajectory};
use crate::measures::{DensitySpec, RngStream};

/// Affine map from working coordinates to the target: `c + (K / eps) y`.
///
/// In working coordinates the target lives in the ball of radius `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMap {
    pub center: Vec<f64>,
    pub factor: f64,
    pub radius: f64,
}

impl SupportMap {
    pub fn new(spec: &DensitySpec, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::invalid(format!("scale must lie in (0, 1], got {scale}")));
        }
        Ok(Self { center: spec.center().to_vec(), factor: spec.support_radius() / scale, radius: scale })
    }

    pub fn to_target(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.center).map(|(v, c)| c + self.factor * v).collect()
    }

    pub fn to_working(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(v, c)| (v - c) / self.factor).collect()
    }
}

/// Density-mode flow: the target density pulled back to working
/// coordinates, sampled with one of the drift estimators.
#[derive(Debug, Clone)]
pub struct DensitySampler {
    spec: Arc<DensitySpec>,
    map: SupportMap,
    cfg: FlowConfig,
}

impl DensitySampler {
    pub fn new(spec: Arc<DensitySpec>, cfg: FlowConfig) -> Result<Self> {
        cfg.validate()?;
        let map = SupportMap::new(&spec, cfg.scale)?;
        Ok(Self { spec, map, cfg })
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn map(&self) -> &SupportMap {
        &self.map
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    /// Unnormalized density in working coordinates.
    pub fn working_density(&self, y: &[f64]) -> f64 {
        let mut x = [0.0; 8];
        if y.len() <= x.len() {
            for ((o, v), c) in x.iter_mut().zip(y).zip(&self.map.center) {
                *o = c + self.map.factor * v;
            }
            self.spec.eval(&x[..y.len()])
        } else {
            self.spec.eval(&self.map.to_target(y))
        }
    }

    /// Uniform proposal cloud in the working support ball.
    pub fn draw_cloud(&self, rng: &mut RngStream) -> Result<ProposalCloud> {
        ProposalCloud::draw_ball(self.spec.dim(), self.map.radius, self.cfg.mc_points, rng, |p| self.working_density(p))
    }

    /// Clouds shared by a whole batch under the configured policy, drawn
    /// from `rng`; empty for [`CloudPolicy::FreshPerTrajectory`].
    pub fn shared_clouds(&self, rng: &mut RngStream) -> Result<Vec<ProposalCloud>> {
        let count = match self.cfg.cloud_policy {
            CloudPolicy::FreshPerTrajectory => 0,
            CloudPolicy::Frozen => 1,
            CloudPolicy::SharedPerStep => match self.cfg.estimator {
                Estimator::Ball => self.cfg.active_steps(),
                Estimator::Normal => 1,
            },
        };
        (0..count).map(|_| self.draw_cloud(rng)).collect()
    }

    /// One trajectory. `shared` holds the batch clouds from
    /// [`Self::shared_clouds`]; an empty slice means fresh clouds.
    pub fn sample(&self, rng: &mut RngStream, shared: &[ProposalCloud]) -> Result<Trajectory> {
        let d = self.spec.dim();
        let y0 = initial_state(d, self.cfg.normalize_init, rng);
        let mut scratch = KernelScratch::new();
        let n = self.cfg.mc_points;
        let estimator = self.cfg.estimator;
        let step = |k: usize, sv: &crate::schedule::ScheduleValue, y: &[f64], out: &mut [f64], rng: &mut RngStream| -> Result<WeightDiagnostics> {
            if estimator == Estimator::Normal && sv.beta > 0.0 {
                return normal_proposal_mean(sv, y, n, rng, |p| self.working_density(p), out);
            }
            let fresh;
            let cloud = match shared.len() {
                0 => {
                    fresh = self.draw_cloud(rng)?;
                    &fresh
                }
                1 => &shared[0],
                _ => &shared[k],
            };
            Ok(density_drift_mc(cloud, sv, y, &mut scratch, out))
        };
        let mut step = step;
        integrate(y0, &self.cfg, |k, sv, y, out| step(k, sv, y, out, rng), |y| self.map.to_target(y))
    }
}

/// Convenience wrapper drawing fresh clouds for a single trajectory.
pub fn euler_sample_density(spec: Arc<DensitySpec>, cfg: &FlowConfig, rng: &mut RngStream) -> Result<Trajectory> {
    let sampler = DensitySampler::new(spec, FlowConfig { cloud_policy: CloudPolicy::FreshPerTrajectory, ..cfg.clone() })?;
    sampler.sample(rng, &[])
}

/// Funnel flow with the 1-D reduced drift; no support map.
pub fn euler_sample_funnel(drift: &FunnelDrift, cfg: &FlowConfig, rng: &mut RngStream) -> Result<Trajectory> {
    let y0 = initial_state(drift.spec().dim, cfg.normalize_init, rng);
    let mut inner = rng.fork(0);
    integrate(y0, cfg, |_, sv, y, out| drift.drift_at(sv, y, &mut inner, out), |y| y.to_vec())
}
