//! Hand-rolled SVG line chart of both distance columns against `k`.

use std::fmt::Write as _;
use std::path::Path;

use crate::experiment::{DistanceRow, DistanceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvgOptions {
    /// Plot `log10` of the distances; non-positive values are dropped.
    pub log_y: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { log_y: true }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const SERIES: [(&str, &str); 2] = [("Riemannian distance", "#1f77b4"), ("2-norm distance", "#d62728")];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let mult = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    mult * mag
}

fn ticks(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

pub fn render_svg(table: &DistanceTable, opts: &SvgOptions) -> String {
    let transform = |v: f64| -> Option<f64> {
        if !v.is_finite() {
            None
        } else if opts.log_y {
            (v > 0.0).then(|| v.log10())
        } else {
            Some(v)
        }
    };
    let columns: [fn(&DistanceRow) -> f64; 2] = [|r| r.riemannian, |r| r.two_norm];
    let series: Vec<Vec<(f64, f64)>> = columns
        .iter()
        .map(|get| {
            table
                .rows
                .iter()
                .filter_map(|r| transform(get(r)).map(|y| (r.k as f64, y)))
                .collect()
        })
        .collect();

    let all = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for r in &table.rows {
        x0 = x0.min(r.k as f64);
        x1 = x1.max(r.k as f64);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    let (y0, y1) = if opts.log_y {
        padded(y0.floor(), y1.ceil())
    } else {
        let (lo, hi) = padded(y0.min(0.0), y1);
        let step = nice_step(hi - lo, 5.0);
        ((lo / step).floor() * step, (hi / step).ceil() * step)
    };
    let frame = Frame {
        x: padded(x0, x1),
        y: (y0, y1),
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">Distance between X_k and Y_k</text>"#,
        WIDTH / 2.0
    );

    // axes
    let (ax0, ax1) = (LEFT, WIDTH - RIGHT);
    let (ay0, ay1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<g id="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<path d="M {ax0} {ay1} L {ax0} {ay0} L {ax1} {ay0}" fill="none"/>"#
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="x-ticks" text-anchor="middle">"#);
    let (fx0, fx1) = frame.x;
    for x in ticks(fx0, fx1, nice_step(fx1 - fx0, 10.0).max(1.0)) {
        let px = frame.px(x);
        let _ = writeln!(
            s,
            r#"<path d="M {px:.2} {ay0} L {px:.2} {:.2}" stroke="black"/>"#,
            ay0 + 5.0
        );
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}">{}</text>"#, ay0 + 19.0, label(x));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="y-ticks" text-anchor="end">"#);
    let y_step = if opts.log_y {
        nice_step(y1 - y0, 10.0).max(1.0)
    } else {
        nice_step(y1 - y0, 5.0)
    };
    for y in ticks(y0, y1, y_step) {
        let py = frame.py(y);
        let text = if opts.log_y {
            format!("1e{}", y.round() as i64)
        } else {
            label(y)
        };
        let _ = writeln!(
            s,
            r#"<path d="M {:.2} {py:.2} L {ax0} {py:.2}" stroke="black"/>"#,
            ax0 - 5.0
        );
        let _ = writeln!(s, r##"<path d="M {ax0} {py:.2} L {ax1} {py:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{text}</text>"#, ax0 - 8.0, py + 4.0);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"#,
        (ax0 + ax1) / 2.0,
        HEIGHT - 14.0
    );
    let y_label = if opts.log_y { "distance (log scale)" } else { "distance" };
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{y_label}</text>"#,
        (ay0 + ay1) / 2.0
    );

    for (points, (name, color)) in series.iter().zip(SERIES) {
        if points.is_empty() {
            continue;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{name}</title></polyline>"#,
            coords.join(" ")
        );
    }

    // lower right: both series are large near k = T and small near k = 0
    let (lx, ly) = (ax1 - 190.0, HEIGHT - BOTTOM - 60.0);
    let _ = writeln!(s, r#"<g id="legend">"#);
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="180" height="46" fill="white" stroke="#999999"/>"##,
        lx - 8.0,
        ly - 4.0
    );
    for (i, (name, color)) in SERIES.iter().enumerate() {
        let y = ly + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 28.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, lx + 36.0, y + 4.0);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(table: &DistanceTable, opts: &SvgOptions, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_svg(table, opts))
}
