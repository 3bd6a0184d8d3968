//! Two-pass softmax mean over a column-major point set.
//!
//! The log weights are formed one coordinate at a time, the maximum is taken,
//! and only then are the weights exponentiated, with a branch-free `exp`
//! that the compiler can vectorize. Reductions use four independent lanes so
//! the summation order (and therefore the result) does not depend on the
//! target's vector width.

use crate::drift::WeightDiagnostics;

const LANES: usize = 4;

/// `e^x` for `x <= 0`, relative error below `1e-14` on `[-708, 0]`.
///
/// Inputs below `-708` return roughly `e^-708` instead of underflowing to 0.
#[inline(always)]
pub fn exp_nonpositive(x: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let x = if x < -708.0 { -708.0 } else { x };
    let kf = x * std::f64::consts::LOG2_E + MAGIC;
    let k_bits = kf.to_bits() as i64 - MAGIC.to_bits() as i64;
    let k = kf - MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // degree-11 Taylor polynomial in Estrin form; |r| <= ln(2)/2
    const C: [f64; 12] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
    ];
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let p01 = C[0] + C[1] * r;
    let p23 = C[2] + C[3] * r;
    let p45 = C[4] + C[5] * r;
    let p67 = C[6] + C[7] * r;
    let p89 = C[8] + C[9] * r;
    let pab = C[10] + C[11] * r;
    let p = (p01 + p23 * r2) + (p45 + p67 * r2) * r4 + (p89 + pab * r2) * r8;
    p * f64::from_bits(((k_bits + 1023) << 52) as u64)
}

/// Reusable buffer for [`softmax_mean_columns`].
#[derive(Debug, Clone, Default)]
pub struct KernelScratch {
    lw: Vec<f64>,
}

impl KernelScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

#[inline(always)]
fn lane_max(v: &[f64]) -> f64 {
    let mut m = [f64::NEG_INFINITY; LANES];
    let chunks = v.chunks_exact(LANES);
    let rest = chunks.remainder();
    for c in chunks {
        for l in 0..LANES {
            m[l] = if c[l] > m[l] { c[l] } else { m[l] };
        }
    }
    let mut out = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for &r in rest {
        out = out.max(r);
    }
    out
}

#[inline(always)]
fn lane_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            s[l] += x[l] * y[l];
        }
    }
    let mut out = s[0] + s[1] + s[2] + s[3];
    for (x, y) in ra.iter().zip(rb) {
        out += x * y;
    }
    out
}

/// Exponentiates `v - shift` in place; returns `(sum, sum of squares)`.
#[inline(always)]
fn exp_in_place(v: &mut [f64], shift: f64) -> (f64, f64) {
    let mut s = [0.0; LANES];
    let mut q = [0.0; LANES];
    let mut chunks = v.chunks_exact_mut(LANES);
    for c in &mut chunks {
        for l in 0..LANES {
            let w = exp_nonpositive(c[l] - shift);
            c[l] = w;
            s[l] += w;
            q[l] += w * w;
        }
    }
    let mut sum = s[0] + s[1] + s[2] + s[3];
    let mut sq = q[0] + q[1] + q[2] + q[3];
    for r in chunks.into_remainder() {
        let w = exp_nonpositive(*r - shift);
        *r = w;
        sum += w;
        sq += w * w;
    }
    (sum, sq)
}

/// Softmax mean of the points stored column-major in `cols` (`dim` columns
/// of length `n`) under log weights `base_log[j] - |x - beta p_j|^2 * inv_two_var`.
///
/// Returns `None` when `n == 0`.
///
/// On x86-64 machines with AVX2 the same arithmetic runs on wider vectors;
/// no fused multiply-add is used, so both paths give identical bits.
pub fn softmax_mean_columns(
    cols: &[f64],
    base_log: &[f64],
    x: &[f64],
    beta: f64,
    inv_two_var: f64,
    scratch: &mut KernelScratch,
    out: &mut [f64],
) -> Option<WeightDiagnostics> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { softmax_avx2(cols, base_log, x, beta, inv_two_var, scratch, out) };
        }
    }
    softmax_body(cols, base_log, x, beta, inv_two_var, scratch, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn softmax_avx2(
    cols: &[f64],
    base_log: &[f64],
    x: &[f64],
    beta: f64,
    inv_two_var: f64,
    scratch: &mut KernelScratch,
    out: &mut [f64],
) -> Option<WeightDiagnostics> {
    softmax_body(cols, base_log, x, beta, inv_two_var, scratch, out)
}

#[inline(always)]
fn softmax_body(
    cols: &[f64],
    base_log: &[f64],
    x: &[f64],
    beta: f64,
    inv_two_var: f64,
    scratch: &mut KernelScratch,
    out: &mut [f64],
) -> Option<WeightDiagnostics> {
    let n = base_log.len();
    if n == 0 {
        return None;
    }
    let lw = &mut scratch.lw;
    lw.resize(n, 0.0);
    let (x0, col0) = (x[0], &cols[..n]);
    for ((l, b), c) in lw.iter_mut().zip(base_log).zip(col0) {
        let r = x0 - beta * c;
        *l = b - r * r * inv_two_var;
    }
    for (i, xi) in x.iter().enumerate().skip(1) {
        for (l, c) in lw.iter_mut().zip(&cols[i * n..(i + 1) * n]) {
            let r = xi - beta * c;
            *l -= r * r * inv_two_var;
        }
    }
    let max = lane_max(lw);
    let (sum, sum_sq) = exp_in_place(lw, max);
    for (i, o) in out.iter_mut().enumerate() {
        *o = lane_dot(lw, &cols[i * n..(i + 1) * n]) / sum;
    }
    let log_g = max + sum.ln() - (n as f64).ln();
    Some(WeightDiagnostics { g: log_g.exp(), log_g, max_log_weight: max, ess: sum * sum / sum_sq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::SoftmaxAccumulator;
    use crate::measures::RngStream;

    #[test]
    fn fast_exp_accuracy() {
        let mut worst = 0.0f64;
        let mut x = 0.0;
        while x > -708.0 {
            let rel = (exp_nonpositive(x) - x.exp()).abs() / x.exp();
            worst = worst.max(rel);
            x -= 0.001_37;
        }
        assert!(worst < 1e-14, "{worst}");
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert!(exp_nonpositive(-1e6) > 0.0 && exp_nonpositive(-1e6) < 1e-300);
    }

    #[test]
    fn matches_accumulator() {
        let mut rng = RngStream::new(8, 0);
        for (dim, n) in [(1usize, 1usize), (1, 7), (2, 1001), (5, 333)] {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| rng.standard_normal(dim)).collect();
            let base: Vec<f64> = (0..n).map(|_| -rng.uniform() * 3.0).collect();
            let mut cols = vec![0.0; dim * n];
            for (j, r) in rows.iter().enumerate() {
                for i in 0..dim {
                    cols[i * n + j] = r[i];
                }
            }
            let x = rng.standard_normal(dim);
            let (beta, inv) = (0.7, 1.0 / (2.0 * 0.09));
            let mut acc = SoftmaxAccumulator::new(dim);
            for (r, b) in rows.iter().zip(&base) {
                let s: f64 = r.iter().zip(&x).map(|(p, xi)| (xi - beta * p).powi(2)).sum();
                acc.push(r, b - s * inv);
            }
            let mut want = vec![0.0; dim];
            let dw = acc.finish(&mut want).unwrap();
            let mut got = vec![0.0; dim];
            let dg = softmax_mean_columns(&cols, &base, &x, beta, inv, &mut KernelScratch::new(), &mut got).unwrap();
            for i in 0..dim {
                assert!((got[i] - want[i]).abs() < 1e-12, "{dim} {n}: {got:?} vs {want:?}");
            }
            assert!((dg.log_g - dw.log_g).abs() < 1e-12);
            assert!((dg.ess - dw.ess).abs() < 1e-9 * dw.ess);
        }
    }
}
