//! Minimal SVG plots: 1-D histogram with a curve overlay, 2-D scatter.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, lo: f64, hi: f64) {
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>
<text x="{PAD}" y="{ty}" font-family="sans-serif" font-size="11">{lo:.3}</text>
<text x="{x2}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="end">{hi:.3}</text>"#,
        y = H - PAD,
        x2 = W - PAD,
        ty = H - PAD + 16.0,
    );
}

/// Histogram of `values` on `[lo, hi]` as a density, with `curve` overlaid.
pub fn histogram(title: &str, values: &[f64], lo: f64, hi: f64, bins: usize, curve: impl Fn(f64) -> f64) -> String {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = values.len().max(1) as f64;
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let grid: Vec<(f64, f64)> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).map(|x| (x, curve(x))).collect();
    let top = heights.iter().chain(grid.iter().map(|p| &p.1)).cloned().fold(0.0f64, f64::max).max(1e-12) * 1.05;
    let sx = |x: f64| PAD + (x - lo) / (hi - lo) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / top * (H - 2.0 * PAD);

    let mut out = String::new();
    header(&mut out, title);
    for (i, &h) in heights.iter().enumerate() {
        let x0 = sx(lo + i as f64 * width);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>"##,
            sy(h),
            sx(lo + (i + 1) as f64 * width) - x0,
            sy(0.0) - sy(h)
        );
    }
    let path: Vec<String> = grid.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##, path.join(" "));
    axes(&mut out, lo, hi);
    out.push_str("</svg>\n");
    out
}

/// Scatter of 2-D points over the box `[lo, hi]^2`.
pub fn scatter(title: &str, points: &[[f64; 2]], lo: [f64; 2], hi: [f64; 2]) -> String {
    let sx = |x: f64| PAD + (x - lo[0]) / (hi[0] - lo[0]) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo[1]) / (hi[1] - lo[1]) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, title);
    for p in points {
        if (lo[0]..=hi[0]).contains(&p[0]) && (lo[1]..=hi[1]).contains(&p[1]) {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="#3182bd" fill-opacity="0.5"/>"##, sx(p[0]), sy(p[1]));
        }
    }
    axes(&mut out, lo[0], hi[0]);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_wellformed() {
        let s = histogram("a<b", &[0.1, 0.2, 0.25, 0.9], 0.0, 1.0, 4, |_| 1.0);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 4);
        assert!(s.contains("a&lt;b"));
    }

    #[test]
    fn scatter_skips_outside_points() {
        let s = scatter("s", &[[0.5, 0.5], [3.0, 0.0]], [0.0, 0.0], [1.0, 1.0]);
        assert_eq!(s.matches("<circle").count(), 1);
    }
}
