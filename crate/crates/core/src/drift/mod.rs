//! Drift of the flow: the softmax-weighted conditional mean `D_t(x)` and
//! the velocity `b_t(x) = (log sigma)'(t) [x - D_t(x)]`.

mod density;
mod empirical;
mod funnel;
mod kernel;

pub use density::{density_drift_mc, normal_proposal_mean, NormalProposalDrift, ProposalCloud, RESAMPLE_LIMIT};
pub use kernel::{exp_nonpositive, softmax_mean_columns, KernelScratch};
pub use empirical::EmpiricalDrift;
pub use funnel::{FunnelDrift, FunnelVariant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::schedule::Schedule;

/// Summary of the softmax weights behind one drift evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    /// Mean unshifted weight `(1/N) sum_j e^{a_j}`.
    pub g: f64,
    /// `ln g`, kept separately because `g` underflows long before `ln g` does.
    pub log_g: f64,
    /// `max_j a_j`, the shift applied before exponentiating.
    pub max_log_weight: f64,
    /// `(sum w)^2 / sum w^2`.
    pub ess: f64,
}

/// One-pass log-sum-exp accumulator for `sum_j w_j p_j / sum_j w_j`.
///
/// The running maximum is subtracted before exponentiating; earlier sums are
/// rescaled whenever it grows, so the largest weight is always exactly 1.
#[derive(Debug, Clone)]
pub struct SoftmaxAccumulator {
    acc: Vec<f64>,
    max: f64,
    sum: f64,
    sum_sq: f64,
    count: usize,
}

impl SoftmaxAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { acc: vec![0.0; dim], max: f64::NEG_INFINITY, sum: 0.0, sum_sq: 0.0, count: 0 }
    }

    pub fn reset(&mut self) {
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        self.max = f64::NEG_INFINITY;
        self.sum = 0.0;
        self.sum_sq = 0.0;
        self.count = 0;
    }

    #[inline]
    pub fn push(&mut self, point: &[f64], log_w: f64) {
        self.count += 1;
        if log_w == f64::NEG_INFINITY {
            return;
        }
        if log_w > self.max {
            let scale = (self.max - log_w).exp();
            if self.sum > 0.0 {
                self.acc.iter_mut().for_each(|a| *a *= scale);
                self.sum *= scale;
                self.sum_sq *= scale * scale;
            }
            self.max = log_w;
        }
        let w = (log_w - self.max).exp();
        for (a, p) in self.acc.iter_mut().zip(point) {
            *a += w * p;
        }
        self.sum += w;
        self.sum_sq += w * w;
    }

    /// True once some pushed weight was nonzero.
    pub fn has_mass(&self) -> bool {
        self.sum > 0.0
    }

    /// Writes the weighted mean into `out`; `None` when every weight was zero.
    pub fn finish(&self, out: &mut [f64]) -> Option<WeightDiagnostics> {
        if !self.has_mass() {
            return None;
        }
        for (o, a) in out.iter_mut().zip(&self.acc) {
            *o = a / self.sum;
        }
        let log_g = self.max + self.sum.ln() - (self.count as f64).ln();
        Some(WeightDiagnostics {
            g: log_g.exp(),
            log_g,
            max_log_weight: self.max,
            ess: self.sum * self.sum / self.sum_sq,
        })
    }
}

/// `b = (log sigma)'(t) (x - D)`.
pub fn drift_to_velocity(schedule: &Schedule, t: f64, x: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let v = schedule.evaluate(t)?;
    Ok(x.iter().zip(d).map(|(xi, di)| v.dlog_sigma * (xi - di)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_direct_softmax() {
        let pts = [[1.0, 0.0], [0.0, 2.0], [-1.0, 1.0]];
        let logw = [-700.0, -702.5, -699.0];
        let mut acc = SoftmaxAccumulator::new(2);
        for (p, l) in pts.iter().zip(logw) {
            acc.push(p, l);
        }
        let mut out = [0.0; 2];
        let diag = acc.finish(&mut out).unwrap();
        let w: Vec<f64> = logw.iter().map(|l| (l + 699.0f64).exp()).collect();
        let s: f64 = w.iter().sum();
        for i in 0..2 {
            let want: f64 = pts.iter().zip(&w).map(|(p, wj)| p[i] * wj).sum::<f64>() / s;
            assert!((out[i] - want).abs() < 1e-15);
        }
        assert_eq!(diag.max_log_weight, -699.0);
        assert!((diag.log_g - (-699.0 + s.ln() - 3f64.ln())).abs() < 1e-12);
        assert!(diag.ess >= 1.0 && diag.ess <= 3.0);
    }

    #[test]
    fn all_zero_weights_have_no_mass() {
        let mut acc = SoftmaxAccumulator::new(1);
        acc.push(&[1.0], f64::NEG_INFINITY);
        assert!(acc.finish(&mut [0.0]).is_none());
    }

    #[test]
    fn velocity_examples() {
        let s = Schedule::linear();
        assert_eq!(drift_to_velocity(&s, 0.3, &[0.5, 1.0], &[0.5, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(drift_to_velocity(&s, 0.0, &[1.0], &[0.0]).unwrap(), vec![-1.0]);
        let v = drift_to_velocity(&s, 0.9, &[0.0], &[1.0]).unwrap()[0];
        assert!((v - 10.0).abs() < 1e-12);
        assert!(drift_to_velocity(&s, 1.0, &[0.0], &[1.0]).is_err());
    }
}
