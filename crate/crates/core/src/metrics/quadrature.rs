//! Composite and adaptive quadrature rules on intervals and rectangles.

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Composite Simpson rule with `n` subintervals (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        acc += simpson_weight(i, n) * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Tensor-product Simpson rule on `[lo0, hi0] x [lo1, hi1]`.
pub fn simpson_2d(f: impl Fn(f64, f64) -> f64, lo: [f64; 2], hi: [f64; 2], n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let hx = (hi[0] - lo[0]) / n as f64;
    let hy = (hi[1] - lo[1]) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo[0] + i as f64 * hx;
        let mut row = 0.0;
        for j in 0..=n {
            row += simpson_weight(j, n) * f(x, lo[1] + j as f64 * hy);
        }
        acc += simpson_weight(i, n) * row;
    }
    acc * hx * hy / 9.0
}

/// Composite trapezoid rule with `n` subintervals.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n {
        acc += f(a + i as f64 * h);
    }
    acc * h
}

/// Adaptive Simpson with Richardson correction; `tol` is absolute.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 2);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
        let w = simpson_2d(|x, y| x * x * y, [0.0, 0.0], [1.0, 2.0], 4);
        assert!((w - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let g = adaptive_simpson(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-12);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_converges() {
        let v = trapezoid(|x| x.exp(), 0.0, 1.0, 100_000);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-9);
    }
}
