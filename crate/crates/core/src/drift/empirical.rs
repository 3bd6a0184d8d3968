use std::sync::Arc;

use nalgebra::DMatrix;

use crate::drift::{SoftmaxAccumulator, WeightDiagnostics};
use crate::error::{Error, Result};
use crate::measures::Dataset;
use crate::schedule::{Schedule, ScheduleValue};

/// Exact drift of the empirical measure of a dataset.
#[derive(Debug, Clone)]
pub struct EmpiricalDrift {
    data: Arc<Dataset>,
    schedule: Schedule,
}

impl EmpiricalDrift {
    pub fn new(data: Arc<Dataset>, schedule: Schedule) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("empirical drift needs a nonempty dataset"));
        }
        Ok(Self { data, schedule })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Log weight `-Gamma_t(x, eta) = -|x - beta eta|^2 / (2 sigma^2)`.
    #[inline]
    fn log_weight(x: &[f64], eta: &[f64], beta: f64, inv_two_var: f64) -> f64 {
        let mut s = 0.0;
        for (a, b) in x.iter().zip(eta) {
            let r = a - beta * b;
            s += r * r;
        }
        -s * inv_two_var
    }

    /// `D` at schedule values `(sigma, beta)`, written into `out`.
    pub fn mean_at(&self, sv: &ScheduleValue, x: &[f64], acc: &mut SoftmaxAccumulator, out: &mut [f64]) -> WeightDiagnostics {
        let inv = 1.0 / (2.0 * sv.sigma * sv.sigma);
        acc.reset();
        for eta in self.data.iter() {
            acc.push(eta, Self::log_weight(x, eta, sv.beta, inv));
        }
        acc.finish(out).expect("the largest softmax weight is 1")
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Result<(Vec<f64>, WeightDiagnostics)> {
        self.check_dim(x)?;
        let sv = self.schedule.evaluate(t)?;
        let mut out = vec![0.0; x.len()];
        let mut acc = SoftmaxAccumulator::new(x.len());
        let diag = self.mean_at(&sv, x, &mut acc, &mut out);
        Ok((out, diag))
    }

    /// `b_t(x)`.
    pub fn velocity(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (d, _) = self.drift(t, x)?;
        let v = self.schedule.evaluate(t)?;
        Ok(x.iter().zip(&d).map(|(a, b)| v.dlog_sigma * (a - b)).collect())
    }

    /// `grad D = (beta / sigma^2) (sum_j w_j eta_j eta_j^T - D D^T)`.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let sv = self.schedule.evaluate(t)?;
        let d = x.len();
        let inv = 1.0 / (2.0 * sv.sigma * sv.sigma);
        let logw: Vec<f64> = self.data.iter().map(|eta| Self::log_weight(x, eta, sv.beta, inv)).collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; d];
        for (eta, wj) in self.data.iter().zip(&w) {
            for (m, e) in mean.iter_mut().zip(eta) {
                *m += wj * e;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        // centered second moment avoids cancellation in E[eta eta^T] - D D^T
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut c = vec![0.0; d];
        for (eta, wj) in self.data.iter().zip(&w) {
            for i in 0..d {
                c[i] = eta[i] - mean[i];
            }
            for i in 0..d {
                let wc = wj * c[i];
                for k in i..d {
                    cov[(i, k)] += wc * c[k];
                }
            }
        }
        let scale = sv.beta / (sv.sigma * sv.sigma) / total;
        for i in 0..d {
            for k in i..d {
                let v = cov[(i, k)] * scale;
                cov[(i, k)] = v;
                cov[(k, i)] = v;
            }
        }
        Ok(cov)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.dim() {
            return Err(Error::invalid(format!("point has dimension {} but dataset has {}", x.len(), self.data.dim())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RngStream;
    use proptest::prelude::*;

    fn drift_of(points: &[Vec<f64>]) -> EmpiricalDrift {
        let d = points[0].len();
        EmpiricalDrift::new(Arc::new(Dataset::from_points(d, points).unwrap()), Schedule::linear()).unwrap()
    }

    #[test]
    fn hand_examples() {
        let single = drift_of(&[vec![0.3, -2.0]]);
        assert_eq!(single.drift(0.7, &[5.0, 5.0]).unwrap().0, vec![0.3, -2.0]);
        let pair = drift_of(&[vec![-1.0], vec![1.0]]);
        assert_eq!(pair.drift(0.4, &[0.0]).unwrap().0, vec![0.0]);
        let two = drift_of(&[vec![0.0], vec![1.0]]);
        let want = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((two.drift(0.5, &[0.5]).unwrap().0[0] - want).abs() < 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        let single = drift_of(&[vec![1.0, 2.0]]);
        assert!(single.jacobian(0.5, &[0.0, 0.0]).unwrap().iter().all(|v| *v == 0.0));
        let pair = drift_of(&[vec![-1.0], vec![1.0]]);
        assert!((pair.jacobian(0.5, &[0.0]).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = RngStream::new(17, 0);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| rng.standard_normal(3)).collect();
        let ev = drift_of(&pts);
        let x = rng.standard_normal(3);
        let t = 0.6;
        let j = ev.jacobian(t, &x).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let dp = ev.drift(t, &xp).unwrap().0;
            let dm = ev.drift(t, &xm).unwrap().0;
            for i in 0..3 {
                let fd = (dp[i] - dm[i]) / (2.0 * h);
                assert!((fd - j[(i, k)]).abs() <= 1e-5 * j.norm(), "{i},{k}: {fd} vs {}", j[(i, k)]);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let ev = drift_of(&[vec![0.0, 1.0]]);
        assert!(ev.drift(0.5, &[0.0]).is_err());
        assert!(ev.drift(1.0, &[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn convex_hull_and_translation(
            seed in 0u64..1000,
            t in 0.0f64..0.99,
            shift in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let mut rng = RngStream::new(seed, 0);
            let pts: Vec<Vec<f64>> = (0..12).map(|_| rng.uniform_cube(&[0.0, 0.0], 2.0)).collect();
            let x = rng.standard_normal(2);
            let ev = drift_of(&pts);
            let (d, diag) = ev.drift(t, &x).unwrap();
            for i in 0..2 {
                let lo = pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(d[i] >= lo - 1e-12 && d[i] <= hi + 1e-12);
            }
            prop_assert!(diag.ess >= 1.0 - 1e-12 && diag.ess <= 12.0 + 1e-9);
            prop_assert!(diag.log_g.is_finite() && diag.log_g <= 0.0 && diag.g <= 1.0);

            // moving the data by v and x by beta v moves D by v
            let sv = Schedule::linear().evaluate(t).unwrap();
            let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect();
            let xs = [x[0] + sv.beta * shift[0], x[1] + sv.beta * shift[1]];
            let d2 = drift_of(&moved).drift(t, &xs).unwrap().0;
            for i in 0..2 {
                prop_assert!((d2[i] - d[i] - shift[i]).abs() < 1e-9);
            }
        }
    }
}
