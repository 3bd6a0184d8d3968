//! Global minimization by annealed flow sampling of `exp(-beta U)` on a
//! shrinking cube around the incumbent, plus the matching rate formulas.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{density_drift_mc, KernelScratch, ProposalCloud};
use crate::error::{Error, Result};
use crate::flow::{initial_state, integrate, CloudPolicy, FlowConfig};
use crate::measures::RngStream;
use crate::metrics::special::{gamma, gamma_lower};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    /// Rounds `M`.
    pub rounds: usize,
    /// Samples `N` per round.
    pub points_per_round: usize,
    /// Proposal points `n` per drift evaluation.
    pub mc_points: usize,
    pub beta0: f64,
    pub alpha0: f64,
    /// Euler steps per sample.
    pub inner_steps: usize,
    pub cloud_policy: CloudPolicy,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            points_per_round: 10,
            mc_points: 50_000,
            beta0: 1.0,
            alpha0: 10.0,
            inner_steps: 30,
            cloud_policy: CloudPolicy::FreshPerTrajectory,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.points_per_round == 0 || self.mc_points == 0 || self.inner_steps == 0 {
            return Err(Error::invalid("rounds, points, mc_points and inner_steps must be positive"));
        }
        if !(self.beta0 > 0.0 && self.beta0.is_finite() && self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid("beta0 and alpha0 must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealRound {
    pub round: usize,
    pub beta: f64,
    pub alpha: f64,
    pub samples: usize,
    /// Best value among this round's samples.
    pub round_best: f64,
    /// Incumbent after the round.
    pub x_star: Vec<f64>,
    pub u_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealHistory {
    pub initial_x: Vec<f64>,
    pub initial_u: f64,
    pub rounds: Vec<AnnealRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub x_star: Vec<f64>,
    pub u_star: f64,
    pub history: AnnealHistory,
}

fn checked(u: &(impl Fn(&[f64]) -> f64 + ?Sized), x: &[f64]) -> Result<f64> {
    let v = u(x);
    if v.is_nan() || v < 0.0 {
        return Err(Error::InvalidObjective { value: v, point: x.to_vec() });
    }
    Ok(v)
}

/// Uniform cloud on `[-1, 1]^d` weighted by `exp(-beta U(center + alpha z))`.
fn draw_cloud(
    u: &(impl Fn(&[f64]) -> f64 + Sync),
    center: &[f64],
    alpha: f64,
    beta: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<ProposalCloud> {
    let d = center.len();
    let zero = vec![0.0; d];
    let mut pts = vec![0.0; n * d];
    let mut log_w = vec![0.0; n];
    let mut y = vec![0.0; d];
    for (p, lw) in pts.chunks_exact_mut(d).zip(log_w.iter_mut()) {
        rng.fill_uniform_cube(&zero, 1.0, p);
        for ((yi, c), z) in y.iter_mut().zip(center).zip(p.iter()) {
            *yi = c + alpha * z;
        }
        *lw = -beta * checked(u, &y)?;
    }
    ProposalCloud::from_log_weights(d, &pts, &log_w)
}

/// Minimizes a nonnegative `u` over `R^d`, starting from the incumbent `0`.
///
/// Round `j` samples `N` points from `exp(-beta_j U(x_* + alpha_j z))` on
/// `z in [-1, 1]^d`, keeps the best point seen so far, then sets
/// `beta <- beta (5 + j)` and `alpha <- alpha / ln(3 + j)`.
pub fn anneal_minimize(
    u: impl Fn(&[f64]) -> f64 + Sync,
    d: usize,
    cfg: &AnnealConfig,
    rng: &mut RngStream,
) -> Result<AnnealResult> {
    cfg.validate()?;
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let flow = FlowConfig {
        normalize_init: false,
        mc_points: cfg.mc_points,
        cloud_policy: cfg.cloud_policy,
        ..FlowConfig::generation(cfg.inner_steps)
    };
    let mut x_star = vec![0.0; d];
    let mut u_star = checked(&u, &x_star)?;
    let history_start = (x_star.clone(), u_star);
    let (mut beta, mut alpha) = (cfg.beta0, cfg.alpha0);
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for j in 0..cfg.rounds {
        let round_seed = rng.next_u64();
        let shared: Vec<ProposalCloud> = match cfg.cloud_policy {
            CloudPolicy::FreshPerTrajectory => Vec::new(),
            CloudPolicy::Frozen => vec![draw_cloud(&u, &x_star, alpha, beta, cfg.mc_points, &mut RngStream::new(round_seed, u64::MAX))?],
            CloudPolicy::SharedPerStep => {
                let mut r = RngStream::new(round_seed, u64::MAX);
                (0..cfg.inner_steps).map(|_| draw_cloud(&u, &x_star, alpha, beta, cfg.mc_points, &mut r)).collect::<Result<_>>()?
            }
        };
        let center = x_star.clone();
        let samples: Vec<Result<(Vec<f64>, f64)>> = (0..cfg.points_per_round)
            .into_par_iter()
            .map(|i| {
                let mut r = RngStream::new(round_seed, i as u64);
                let y0 = initial_state(d, false, &mut r);
                let mut scratch = KernelScratch::new();
                let mut cloud_rng = r.fork(1);
                let traj = integrate(
                    y0,
                    &flow,
                    |k, sv, y, out| {
                        let fresh;
                        let cloud = match shared.len() {
                            0 => {
                                fresh = draw_cloud(&u, &center, alpha, beta, cfg.mc_points, &mut cloud_rng)?;
                                &fresh
                            }
                            1 => &shared[0],
                            _ => &shared[k],
                        };
                        Ok(density_drift_mc(cloud, sv, y, &mut scratch, out))
                    },
                    |z| center.iter().zip(z).map(|(c, v)| c + alpha * v).collect(),
                )?;
                let val = checked(&u, &traj.output)?;
                Ok((traj.output, val))
            })
            .collect();
        let mut round_best = f64::INFINITY;
        for s in samples {
            let (x, v) = s?;
            round_best = round_best.min(v);
            if v < u_star {
                u_star = v;
                x_star = x;
            }
        }
        rounds.push(AnnealRound {
            round: j,
            beta,
            alpha,
            samples: cfg.points_per_round,
            round_best,
            x_star: x_star.clone(),
            u_star,
        });
        beta *= 5.0 + j as f64;
        alpha /= (3.0 + j as f64).ln();
    }
    Ok(AnnealResult {
        x_star,
        u_star,
        history: AnnealHistory { initial_x: history_start.0, initial_u: history_start.1, rounds },
    })
}

/// `eps^2 + f*^2 exp(-N delta)`: bound on `E|max_n f(X_n) - f*|^2`.
pub fn max_sampling_bound(epsilon: f64, f_star: f64, n: usize, delta_eps: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < f_star && f_star.is_finite()) {
        return Err(Error::invalid(format!("need 0 < epsilon < f*, got epsilon = {epsilon}, f* = {f_star}")));
    }
    if !(delta_eps > 0.0 && delta_eps <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta_eps}")));
    }
    Ok(epsilon * epsilon + f_star * f_star * (-(n as f64) * delta_eps).exp())
}

/// `delta_{beta,eps}(ell) = (k0/k1)^{d/2} gamma(d/2, beta eps) / [Gamma(d/2) - gamma(d/2, ell beta) + (ell beta)^{d/2} / d]`.
pub fn anneal_rate(beta: f64, epsilon: f64, ell: f64, d: usize, kappa0: f64, kappa1: f64) -> Result<f64> {
    if !(kappa0 > 0.0 && kappa0 <= kappa1 && kappa1.is_finite()) {
        return Err(Error::invalid(format!("need 0 < kappa0 <= kappa1, got {kappa0}, {kappa1}")));
    }
    if !(beta >= 1.0 && beta.is_finite() && epsilon > 0.0 && ell >= 0.0 && d > 0) {
        return Err(Error::invalid("need beta >= 1, epsilon > 0, ell >= 0, d >= 1"));
    }
    let s = d as f64 / 2.0;
    let lb = ell * beta;
    let denom = gamma(s) - gamma_lower(s, lb) + lb.powf(s) / d as f64;
    Ok((kappa0 / kappa1).powf(s) * gamma_lower(s, beta * epsilon) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> AnnealConfig {
        AnnealConfig { mc_points: 2000, inner_steps: 10, ..AnnealConfig::default() }
    }

    #[test]
    fn quadratic_minimum() {
        let u = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2) + (v - 0.1).powi(2)).sum::<f64>();
        let res = anneal_minimize(u, 2, &quick(), &mut RngStream::new(3, 0)).unwrap();
        assert!((res.u_star - 0.04).abs() < 1e-3, "{}", res.u_star);
        let vals: Vec<f64> = res.history.rounds.iter().map(|r| r.u_star).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.u_star <= res.history.initial_u);
    }

    #[test]
    fn schedule_of_beta_and_alpha() {
        let res = anneal_minimize(|x: &[f64]| x[0] * x[0], 1, &quick(), &mut RngStream::new(1, 0)).unwrap();
        let mut b = 1.0;
        let mut a = 10.0;
        for (j, r) in res.history.rounds.iter().enumerate() {
            assert_eq!((r.beta, r.alpha), (b, a));
            b *= 5.0 + j as f64;
            a /= (3.0 + j as f64).ln();
        }
    }

    #[test]
    fn invalid_objective() {
        let r = anneal_minimize(|x: &[f64]| x[0] - 1.0, 1, &quick(), &mut RngStream::new(1, 0));
        assert!(matches!(r, Err(Error::InvalidObjective { .. })));
        let r = anneal_minimize(|x: &[f64]| if x[0] > 2.0 { f64::NAN } else { 1.0 }, 1, &quick(), &mut RngStream::new(1, 0));
        assert!(matches!(r, Err(Error::InvalidObjective { .. })));
    }

    #[test]
    fn deterministic() {
        let u = |x: &[f64]| x[0].powi(2) + (x[1] - 1.0).powi(2);
        let a = anneal_minimize(u, 2, &quick(), &mut RngStream::new(9, 0)).unwrap();
        let b = anneal_minimize(u, 2, &quick(), &mut RngStream::new(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_examples() {
        let v = max_sampling_bound(0.1, 1.0, 100, 0.05).unwrap();
        assert!((v - (0.01 + (-5f64).exp())).abs() < 1e-15);
        assert!((max_sampling_bound(0.1, 1.0, 1_000_000, 0.05).unwrap() - 0.01).abs() < 1e-15);
        assert!(max_sampling_bound(1.5, 1.0, 10, 0.1).is_err());
        assert!(max_sampling_bound(0.1, 1.0, 10, 0.0).is_err());
    }

    #[test]
    fn rate_examples() {
        let v = anneal_rate(1.0, 1.0, 0.0, 2, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-12);
        let lim = anneal_rate(1e4, 1.0, 0.0, 3, 0.5, 2.0).unwrap();
        assert!((lim - 0.25f64.powf(1.5)).abs() < 1e-10);
        assert!(anneal_rate(1e4, 0.1, 0.5, 2, 1.0, 1.0).unwrap() < 1e-3);
        assert!(anneal_rate(0.5, 1.0, 0.0, 2, 1.0, 1.0).is_err());
        assert!(anneal_rate(2.0, 1.0, 0.0, 2, 2.0, 1.0).is_err());
        // nondecreasing in beta at ell = 0; in ell the denominator has
        // derivative beta (ell beta)^{d/2-1} (1/2 - e^{-ell beta}), so the rate
        // only decreases once ell beta >= ln 2
        for d in [1usize, 2, 5] {
            let mut prev = 0.0;
            for b in [1.0, 2.0, 5.0, 20.0, 100.0] {
                let v = anneal_rate(b, 0.3, 0.0, d, 1.0, 2.0).unwrap();
                assert!(v >= prev - 1e-15);
                prev = v;
            }
            let mut prev = f64::INFINITY;
            for l in [0.18, 0.25, 0.5, 1.0, 3.0] {
                let v = anneal_rate(4.0, 0.3, l, d, 1.0, 2.0).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
            assert!(anneal_rate(4.0, 0.3, 0.1, d, 1.0, 2.0).unwrap() > anneal_rate(4.0, 0.3, 0.0, d, 1.0, 2.0).unwrap());
        }
    }
}
