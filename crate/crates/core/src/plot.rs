//! Minimal SVG line plots and heatmaps. Convenience only; the CSV files are
//! the actual output.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds<I: Iterator<Item = f64>>(it: I) -> (f64, f64) {
    let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 { (lo - 0.5, hi + 0.5) } else { (lo, hi) }
}

fn header(s: &mut String, title: &str) {
    let _ = write!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = write!(s, r#"<rect width="100%" height="100%" fill="white"/><text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
}

fn short(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) { format!("{v:.3}") } else { format!("{v:.2e}") }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, xl: &str, yl: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64), log_x: bool) {
    let _ = write!(s, r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * M, H - 2.0 * M);
    let fx = |v: f64| if log_x { short(10f64.powf(v)) } else { short(v) };
    let _ = write!(s, r#"<text x="{M}" y="{}">{}</text>"#, H - M + 16.0, fx(x0));
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - M, H - M + 16.0, fx(x1));
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, H - M, short(y0));
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, M + 10.0, short(y1));
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xl));
    let _ = write!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#, H / 2.0, H / 2.0, escape(yl));
}

/// Line plot of several series; `log_x` puts the x axis on a log scale.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let xb = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))));
    let yb = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| M + (tx(x) - xb.0) / (xb.1 - xb.0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - yb.0) / (yb.1 - yb.0) * (H - 2.0 * M);
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, x_label, y_label, xb, yb, log_x);
    for (k, ser) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser.points.iter()
            .filter(|p| p.1.is_finite() && tx(p.0).is_finite())
            .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
            .collect();
        let _ = write!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = write!(s, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, W - M - 4.0, M + 16.0 + 14.0 * k as f64, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of `values[i][j]` over `x[i]`, `y[j]` with a blue-white-red map
/// centred on zero. NaN cells are grey.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64], values: &[Vec<f64>]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, x_label, y_label, bounds(x.iter().copied()), bounds(y.iter().copied()), false);
    let scale = values.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let cw = (W - 2.0 * M) / x.len().max(1) as f64;
    let ch = (H - 2.0 * M) / y.len().max(1) as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() {
                let t = (v / scale).clamp(-1.0, 1.0);
                let (r, g, b) = if t < 0.0 {
                    let u = 1.0 + t;
                    (255.0 * u, 255.0 * u, 255.0)
                } else {
                    (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
                };
                format!("rgb({},{},{})", r as u8, g as u8, b as u8)
            } else {
                "#999".to_string()
            };
            let _ = write!(s, r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                M + i as f64 * cw, H - M - (j + 1) as f64 * ch, cw + 0.5, ch + 0.5);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let s = line_plot("t<1", "x", "y", &[Series { label: "a".into(), points: vec![(1.0, 0.0), (10.0, 1.0)] }], true);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("t&lt;1") && s.contains("polyline"));
        let h = heatmap("h", "x", "y", &[0.0, 1.0], &[0.0, 1.0], &[vec![-1.0, f64::NAN], vec![0.5, 0.0]]);
        assert_eq!(h.matches("<rect").count(), 2 + 4);
    }
}
