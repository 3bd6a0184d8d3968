use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::drift::{FunnelDrift, FunnelVariant};
use crate::error::{Error, Result};
use crate::flow::{euler_generate, euler_sample_funnel, DensitySampler, FlowConfig, Trajectory};
use crate::measures::{Dataset, DensitySpec, FunnelSpec, RngStream, SampleCloud};
use crate::report::{FailureRecord, RunReport};

/// Stream index reserved for clouds shared across a batch.
pub const SHARED_CLOUD_STREAM: u64 = u64::MAX;

/// What a batch integrates towards.
#[derive(Debug, Clone)]
pub enum MeasureSource {
    Empirical(Arc<Dataset>),
    Density(Arc<DensitySpec>),
    Funnel { spec: FunnelSpec, variant: FunnelVariant },
}

impl MeasureSource {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSource::Empirical(d) => d.dim(),
            MeasureSource::Density(s) => s.dim(),
            MeasureSource::Funnel { spec, .. } => spec.dim,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            MeasureSource::Empirical(_) => "empirical",
            MeasureSource::Density(_) => "density",
            MeasureSource::Funnel { .. } => "funnel",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    /// Final samples of the successful trajectories, in index order.
    pub samples: SampleCloud,
    /// Indices of the trajectories behind `samples`.
    pub indices: Vec<usize>,
    /// Filled only when the config asks for trajectories or diagnostics.
    pub trajectories: Vec<Trajectory>,
    pub report: RunReport,
}

/// Runs `count` independent trajectories in parallel.
///
/// Trajectory `i` draws from stream `(master_seed, i)`, so results do not
/// depend on the thread count. Failed trajectories are reported; the batch
/// itself fails once more than 1% of them do.
pub fn run_batch(source: &MeasureSource, cfg: &FlowConfig, count: usize, master_seed: u64) -> Result<BatchOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let dim = source.dim();
    enum Runner {
        Empirical(Arc<Dataset>),
        Density(DensitySampler, Vec<crate::drift::ProposalCloud>),
        Funnel(FunnelDrift),
    }
    let runner = match source {
        MeasureSource::Empirical(d) => {
            if d.is_empty() {
                return Err(Error::invalid("dataset is empty"));
            }
            Runner::Empirical(d.clone())
        }
        MeasureSource::Density(spec) => {
            let sampler = DensitySampler::new(spec.clone(), cfg.clone())?;
            let shared = sampler.shared_clouds(&mut RngStream::new(master_seed, SHARED_CLOUD_STREAM))?;
            Runner::Density(sampler, shared)
        }
        MeasureSource::Funnel { spec, variant } => {
            Runner::Funnel(FunnelDrift::new(*spec, cfg.schedule, cfg.mc_points, *variant)?)
        }
    };
    let results: Vec<Result<Trajectory>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i as u64);
            match &runner {
                Runner::Empirical(d) => euler_generate(d, cfg, &mut rng),
                Runner::Density(s, shared) => s.sample(&mut rng, shared),
                Runner::Funnel(f) => euler_sample_funnel(f, cfg, &mut rng),
            }
        })
        .collect();

    let mut report = RunReport::new("batch", cfg, master_seed);
    let mut flat = Vec::with_capacity(count * dim);
    let mut indices = Vec::with_capacity(count);
    let mut trajectories = Vec::new();
    let keep = cfg.record_trajectory || cfg.record_diagnostics;
    let (mut ess_min, mut ess_sum, mut ess_n) = (f64::INFINITY, 0.0, 0usize);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                flat.extend_from_slice(&t.output);
                indices.push(i);
                for d in &t.diagnostics {
                    ess_min = ess_min.min(d.ess);
                    ess_sum += d.ess;
                    ess_n += 1;
                }
                if keep {
                    trajectories.push(t);
                }
            }
            Err(e) => report.failures.push(FailureRecord { index: i, error: e.to_string() }),
        }
    }
    let failed = report.failures.len();
    if failed * 100 > count {
        return Err(Error::TooManyFailures { failed, total: count });
    }
    report
        .metric("source", source.label())
        .metric("dim", dim)
        .metric("requested", count)
        .metric("completed", indices.len())
        .metric("failed", failed);
    if ess_n > 0 {
        report.metric("ess_min", ess_min).metric("ess_mean", ess_sum / ess_n as f64);
    }
    report.wall_ms = start.elapsed().as_millis() as u64;
    let samples = if flat.is_empty() { Dataset::empty(dim) } else { Dataset::from_flat(dim, flat)? };
    Ok(BatchOutput { samples, indices, trajectories, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::CloudPolicy;

    fn pair() -> MeasureSource {
        MeasureSource::Empirical(Arc::new(Dataset::from_points(2, &[vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap()))
    }

    #[test]
    fn deterministic_and_ordered() {
        let cfg = FlowConfig::generation(10);
        let a = run_batch(&pair(), &cfg, 17, 5).unwrap();
        let b = run_batch(&pair(), &cfg, 17, 5).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.indices, (0..17).collect::<Vec<_>>());
        let mut one = RngStream::new(5, 3);
        let single = euler_generate(match &pair() {
            MeasureSource::Empirical(d) => d,
            _ => unreachable!(),
        }, &cfg, &mut one)
        .unwrap();
        assert_eq!(a.samples.point(3), &single.output[..]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let spec = Arc::new(DensitySpec::from_name("sine").unwrap());
        let cfg = FlowConfig { cloud_policy: CloudPolicy::SharedPerStep, ..FlowConfig::density(8, 200, 1.0) };
        let src = MeasureSource::Density(spec);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_batch(&src, &cfg, 9, 1).unwrap())
        };
        assert_eq!(run(1).samples, run(3).samples);
    }

    #[test]
    fn empty_batch() {
        let out = run_batch(&pair(), &FlowConfig::generation(3), 0, 1).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.samples.dim(), 2);
    }

    #[test]
    fn funnel_batch() {
        let src = MeasureSource::Funnel { spec: FunnelSpec::new(0.5, 2).unwrap(), variant: FunnelVariant::Direct };
        let cfg = FlowConfig { mc_points: 200, normalize_init: false, record_diagnostics: true, ..FlowConfig::generation(10) };
        let out = run_batch(&src, &cfg, 6, 2).unwrap();
        assert_eq!(out.samples.len(), 6);
        assert!(out.report.metrics.contains_key("ess_min"));
    }
}
