use crate::drift::{softmax_mean_columns, KernelScratch};
use crate::error::{Error, Result};
use crate::measures::Dataset;

/// Fine-step solution of the linear-schedule flow driven by an empirical law.
///
/// Classical RK4 in `s = -ln sigma`, where the equation reads
/// `dY/ds = D(Y) - Y`, with at most `max_ds` per step. Returns the state and
/// `ln g` at each of `times`, which must be nondecreasing and below 1.
pub fn empirical_flow_rk4(data: &Dataset, y0: &[f64], times: &[f64], max_ds: f64) -> Result<Vec<(Vec<f64>, f64)>> {
    let d = data.dim();
    if y0.len() != d || data.is_empty() {
        return Err(Error::invalid("start point must match a nonempty dataset"));
    }
    if !(max_ds > 0.0) {
        return Err(Error::invalid("max_ds must be positive"));
    }
    let n = data.len();
    let mut cols = vec![0.0; n * d];
    for (j, p) in data.iter().enumerate() {
        for i in 0..d {
            cols[i * n + j] = p[i];
        }
    }
    let zeros = vec![0.0; n];
    let mut scratch = KernelScratch::new();
    let mut field = |s: f64, y: &[f64], out: &mut [f64]| -> f64 {
        let sigma = (-s).exp();
        let inv = 1.0 / (2.0 * sigma * sigma);
        let diag = softmax_mean_columns(&cols, &zeros, y, 1.0 - sigma, inv, &mut scratch, out).expect("dataset is nonempty");
        for (o, yi) in out.iter_mut().zip(y) {
            *o -= yi;
        }
        diag.log_g
    };

    let mut y = y0.to_vec();
    let mut s = 0.0;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, 1)")));
        }
        let target = -(-t).ln_1p();
        if target < s {
            return Err(Error::invalid("times must be nondecreasing"));
        }
        let steps = ((target - s) / max_ds).ceil() as usize;
        let h = if steps > 0 { (target - s) / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            field(s, &y, &mut k1);
            tmp.iter_mut().zip(&y).zip(&k1).for_each(|((t, y), k)| *t = y + 0.5 * h * k);
            field(s + 0.5 * h, &tmp, &mut k2);
            tmp.iter_mut().zip(&y).zip(&k2).for_each(|((t, y), k)| *t = y + 0.5 * h * k);
            field(s + 0.5 * h, &tmp, &mut k3);
            tmp.iter_mut().zip(&y).zip(&k3).for_each(|((t, y), k)| *t = y + h * k);
            field(s + h, &tmp, &mut k4);
            for i in 0..d {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += h;
        }
        s = target;
        let log_g = field(s, &y, &mut k1);
        out.push((y.clone(), log_g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::exact_singleton_solution;
    use crate::measures::RngStream;
    use crate::schedule::Schedule;

    #[test]
    fn singleton_matches_closed_form() {
        let a = vec![0.4, -1.0];
        let data = Dataset::from_points(2, &[a.clone()]).unwrap();
        let y0 = vec![1.5, 0.2];
        let times = [0.0, 0.3, 0.9, 0.99];
        let got = empirical_flow_rk4(&data, &y0, &times, 0.005).unwrap();
        for ((y, log_g), &t) in got.iter().zip(&times) {
            let want = exact_singleton_solution(&Schedule::linear(), &a, &y0, t);
            assert!(y.iter().zip(&want).all(|(p, q)| (p - q).abs() < 1e-11), "{t}: {y:?} {want:?}");
            // a point mass keeps g at its initial value
            assert!((log_g + (1.5f64 * 1.5 + 0.04) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn step_refinement_converges() {
        let mut rng = RngStream::new(4, 0);
        let flat: Vec<f64> = (0..2 * 300).map(|_| rng.uniform()).collect();
        let data = Dataset::from_flat(2, flat).unwrap();
        let y0 = rng.standard_normal(2);
        let times = [0.1, 0.5, 0.9];
        let coarse = empirical_flow_rk4(&data, &y0, &times, 0.01).unwrap();
        let fine = empirical_flow_rk4(&data, &y0, &times, 0.002).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c.1 - f.1).abs() < 1e-9, "{} vs {}", c.1, f.1);
        }
        assert!(empirical_flow_rk4(&data, &y0, &[0.5, 0.2], 0.1).is_err());
        assert!(empirical_flow_rk4(&data, &y0, &[1.0], 0.1).is_err());
    }
}
