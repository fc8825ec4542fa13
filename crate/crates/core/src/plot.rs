//! Static SVG line charts built from aggregated figures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::RunnerError;
use crate::metrics::Metric;
use crate::runner::{multi_series, CurvePoint, Figure};
use crate::scenario::Axis;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 56.0;

fn colour(protocol: &str) -> &'static str {
    match protocol {
        "dsr" => "#c0392b",
        "mea-dsr" => "#1f77b4",
        _ => "#555555",
    }
}

fn metric_label(m: Metric) -> &'static str {
    match m {
        Metric::Nro => "NRO (control tx per delivered packet)",
        Metric::Pdf => "PDF",
        Metric::Cep => "CEP (J per delivered packet)",
        Metric::Sdcen => "SDCEN (J)",
        Metric::Mrer => "MRER",
    }
}

/// Round step for about `target` ticks across `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    if span <= 0.0 || !span.is_finite() {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 { (lo - 0.5_f64.max(lo.abs() * 0.1), hi + 0.5_f64.max(hi.abs() * 0.1)) } else { (lo, hi) };
    let step = nice_step(hi - lo, 5.0);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let t = (0..=n).map(|i| start + step * i as f64).collect();
    (start, end, t)
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one chart. Error bars show ±1 standard deviation and are left
/// out when a point has a single sample.
pub fn render_svg(fig: &Figure) -> String {
    let points: Vec<&CurvePoint> = fig.curves.values().flatten().collect();
    let x_lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = points.iter().map(|p| p.mean - bar(p)).fold(f64::INFINITY, f64::min).min(0.0);
    let y_hi = points.iter().map(|p| p.mean + bar(p)).fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, xt) = ticks(x_lo, x_hi);
    let (y0, y1, yt) = ticks(y_lo, y_hi);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let x_label: &str = match Axis::parse(&fig.axis) {
        Some(a) => a.x_label(),
        None => &fig.axis,
    };
    let title = if fig.series == "all" || fig.axis == "scenario" {
        format!("{} vs {}", fig.metric.as_str().to_uppercase(), x_label)
    } else {
        format!("{} vs {} ({})", fig.metric.as_str().to_uppercase(), x_label, fig.series)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&title));
    for &t in &yt {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t));
    }
    for &t in &xt {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t));
    }
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(metric_label(fig.metric))
    );

    for (i, (protocol, curve)) in fig.curves.iter().enumerate() {
        let c = colour(protocol);
        let path: Vec<String> = curve.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
        let _ = writeln!(s, r#"<g class="series" data-protocol="{}">"#, escape(protocol));
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, path.join(" "));
        for p in curve {
            let (x, y) = (sx(p.x), sy(p.mean));
            if p.n > 1 {
                let (lo, hi) = (sy(p.mean - p.std), sy(p.mean + p.std));
                let _ = writeln!(
                    s,
                    r#"<path class="errorbar" d="M{x:.2},{lo:.2}V{hi:.2}M{:.2},{lo:.2}H{:.2}M{:.2},{hi:.2}H{:.2}" stroke="{c}"/>"#,
                    x - 4.0,
                    x + 4.0,
                    x - 4.0,
                    x + 4.0
                );
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{c}"/>"#);
        }
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = LEFT + pw - 110.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, ly + 4.0, escape(protocol));
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn bar(p: &CurvePoint) -> f64 {
    if p.n > 1 {
        p.std
    } else {
        0.0
    }
}

/// Writes `charts/<stem>.svg` for every figure.
pub fn write_charts(dir: &Path, figs: &[Figure]) -> Result<Vec<PathBuf>, RunnerError> {
    let chart_dir = dir.join("charts");
    fs::create_dir_all(&chart_dir).map_err(|source| RunnerError::Io { path: chart_dir.clone(), source })?;
    let mut written = Vec::new();
    for f in figs {
        let path = chart_dir.join(format!("{}.svg", f.stem(multi_series(figs, &f.axis))));
        fs::write(&path, render_svg(f)).map_err(|source| RunnerError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
