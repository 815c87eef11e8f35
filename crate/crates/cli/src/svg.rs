//! Deterministic SVG line charts: the seed mean of each curve with a band of
//! one standard deviation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::table::Metric;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    /// Position in `[0, 1]`.
    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.max(f64::MIN_POSITIVE).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn tick_label(&self, u: f64) -> String {
        let v = self.lo + u * (self.hi - self.lo);
        let v = if self.log { 10f64.powf(v) } else { v };
        if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
            format!("{v:.1e}")
        } else {
            format!("{v:.2}")
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders `metric` as a standalone SVG document.
pub fn render_svg(metric: &Metric) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let bands: Vec<(Vec<f64>, Vec<f64>)> = metric
        .series
        .iter()
        .map(|s| (s.mean(), s.variance().iter().map(|v| v.sqrt()).collect()))
        .collect();
    let x_axis = Axis::new(metric.series.iter().flat_map(|s| s.x.iter().copied()), metric.log_x);
    let y_axis = Axis::new(
        bands
            .iter()
            .flat_map(|(m, sd)| m.iter().zip(sd).flat_map(|(m, sd)| [m - sd, m + sd])),
        false,
    );
    let px = |x: f64| LEFT + x_axis.unit(x) * plot_w;
    let py = |y: f64| TOP + (1.0 - y_axis.unit(y)) * plot_h;

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&metric.name)
    );
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let u = i as f64 / 4.0;
        let (x, y) = (LEFT + u * plot_w, TOP + (1.0 - u) * plot_h);
        let _ = writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            x_axis.tick_label(u)
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            y_axis.tick_label(u)
        );
    }
    let x_label = if metric.log_x {
        format!("{} (log scale)", metric.x_label)
    } else {
        metric.x_label.clone()
    };
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(&x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&metric.y_label)
    );
    for (i, (series, (mean, sd))) in metric.series.iter().zip(&bands).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = series
            .x
            .iter()
            .zip(mean.iter().zip(sd))
            .map(|(&x, (m, s))| (px(x), py(m + s)));
        let lower = series
            .x
            .iter()
            .zip(mean.iter().zip(sd))
            .map(|(&x, (m, s))| (px(x), py(m - s)))
            .rev();
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            w,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = series
            .x
            .iter()
            .zip(mean)
            .map(|(&x, &m)| format!("{:.2},{:.2}", px(x), py(m)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
            lx + 26.0,
            escape(&series.curve)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg(metric: &Metric, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(metric)).map_err(|e| CliError::io(path, e))
}
