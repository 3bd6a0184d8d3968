use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded random stream identified by `(master_seed, stream_index)`.
///
/// Each index selects a separate ChaCha stream under the same key, so
/// workers never share a generator.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self { master_seed, stream_index, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Fresh stream keyed by a value drawn from this one.
    pub fn fork(&mut self, index: u64) -> RngStream {
        let seed = self.rng.next_u64();
        RngStream::new(seed, index)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn index_below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    /// `d` independent `N(0, 1)` coordinates.
    pub fn standard_normal(&mut self, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        self.fill_standard_normal(&mut v);
        v
    }

    /// Uniform point in the Euclidean ball `{|x|_2 <= radius}`.
    pub fn fill_uniform_ball(&mut self, radius: f64, out: &mut [f64]) {
        let d = out.len();
        if d == 1 {
            out[0] = radius * (2.0 * self.uniform() - 1.0);
            return;
        }
        let norm = loop {
            self.fill_standard_normal(out);
            let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                break n;
            }
        };
        let r = radius * self.uniform().powf(1.0 / d as f64);
        for v in out {
            *v *= r / norm;
        }
    }

    pub fn uniform_ball(&mut self, d: usize, radius: f64) -> Vec<f64> {
        let mut v = vec![0.0; d];
        self.fill_uniform_ball(radius, &mut v);
        v
    }

    /// Independent uniform coordinates on `[c_i - h, c_i + h]`.
    pub fn fill_uniform_cube(&mut self, center: &[f64], half_width: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(center) {
            *o = c + half_width * (2.0 * self.uniform() - 1.0);
        }
    }

    pub fn uniform_cube(&mut self, center: &[f64], half_width: f64) -> Vec<f64> {
        let mut v = vec![0.0; center.len()];
        self.fill_uniform_cube(center, half_width, &mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(7, 0);
        let xs = rng.standard_normal(1_000_000);
        let (m, v) = mean_var(&xs);
        // 3 sigma / sqrt(n) = 0.003 for the mean
        assert!(m.abs() < 0.005, "mean {m}");
        assert!((v - 1.0).abs() < 0.005, "var {v}");
    }

    #[test]
    fn determinism_and_stream_separation() {
        let a = RngStream::new(11, 3).standard_normal(64);
        let b = RngStream::new(11, 3).standard_normal(64);
        let c = RngStream::new(11, 4).standard_normal(64);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let corr: f64 = a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() / 64.0;
        assert!(corr.abs() < 0.5);
    }

    #[test]
    fn ball_support_and_area_ratio() {
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mut inner = 0usize;
        for _ in 0..n {
            let p = rng.uniform_ball(2, 2.0);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r <= 2.0);
            if r <= 1.0 {
                inner += 1;
            }
        }
        let frac = inner as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn ball_mean_is_zero() {
        let mut rng = RngStream::new(9, 1);
        let n = 1_000_000;
        let radius = 1.5;
        let mut sum = [0.0; 3];
        for _ in 0..n {
            let p = rng.uniform_ball(3, radius);
            assert!(p.iter().map(|v| v * v).sum::<f64>() <= radius * radius * (1.0 + 1e-12));
            for i in 0..3 {
                sum[i] += p[i];
            }
        }
        for s in sum {
            assert!((s / n as f64).abs() < 3.0 * radius / (n as f64).sqrt());
        }
    }

    #[test]
    fn cube_support_and_variance() {
        let mut rng = RngStream::new(13, 0);
        let center = [0.0, 0.0];
        let n = 200_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let p = rng.uniform_cube(&center, 0.5);
            assert!(p.iter().all(|v| v.abs() <= 0.5));
            xs.push(p[0]);
        }
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 3.0 * (1.0f64 / 12.0).sqrt() / (n as f64).sqrt());
        assert!((v - 1.0 / 12.0).abs() < 0.002, "{v}");

        let shifted = RngStream::new(13, 1).uniform_cube(&[3.0, -2.0], 0.25);
        assert!((shifted[0] - 3.0).abs() <= 0.25 && (shifted[1] + 2.0).abs() <= 0.25);
    }
}
