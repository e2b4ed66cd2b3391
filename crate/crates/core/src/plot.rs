//! SVG plots drawn from figure tables.
//!
//! The input is the table written by [`crate::experiments::run_figure`]:
//! columns `series, x, theory, emp_mean, emp_min, emp_max`, labels in the
//! preamble. Output depends on nothing else, so a stored CSV always
//! regenerates the same bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::record::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Tick positions at a 1-2-5 spacing covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

struct Curve {
    label: String,
    theory: Vec<(f64, f64)>,
    /// `(x, mean, min, max)`.
    empirical: Vec<(f64, f64, f64, f64)>,
}

fn curves(table: &Table) -> Result<Vec<Curve>> {
    let series = table.column_str("series")?;
    let x = table.column_f64("x")?;
    let theory = table.column_f64("theory")?;
    let mean = table.column_f64("emp_mean")?;
    let min = table.column_f64("emp_min")?;
    let max = table.column_f64("emp_max")?;
    let mut out: Vec<Curve> = Vec::new();
    for i in 0..x.len() {
        let idx = match out.iter().position(|c| c.label == series[i]) {
            Some(j) => j,
            None => {
                out.push(Curve {
                    label: series[i].to_string(),
                    theory: Vec::new(),
                    empirical: Vec::new(),
                });
                out.len() - 1
            }
        };
        if x[i].is_finite() && theory[i].is_finite() {
            out[idx].theory.push((x[i], theory[i]));
        }
        if x[i].is_finite() && mean[i].is_finite() {
            let lo = if min[i].is_finite() { min[i] } else { mean[i] };
            let hi = if max[i].is_finite() { max[i] } else { mean[i] };
            out[idx].empirical.push((x[i], mean[i], lo, hi));
        }
    }
    Ok(out)
}

/// Renders a figure table as SVG.
pub fn plot_table(table: &Table) -> Result<String> {
    let curves = curves(table)?;
    let xs = curves.iter().flat_map(|c| {
        c.theory
            .iter()
            .map(|p| p.0)
            .chain(c.empirical.iter().map(|p| p.0))
    });
    let ys = curves.iter().flat_map(|c| {
        c.theory
            .iter()
            .map(|p| p.1)
            .chain(c.empirical.iter().flat_map(|p| [p.2, p.3]))
    });
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::Format("figure table has no finite points".into()));
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let meta = |k: &str| escape(table.meta(k).unwrap_or(""));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        meta("title")
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#333"/>"##
    );
    for t in ticks(x0, x1) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#333"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            sx(t),
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#333"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            LEFT - 5.0,
            sy(t),
            LEFT,
            LEFT - 8.0,
            sy(t) + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        meta("x_label")
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">{1}</text>"#,
        TOP + ph / 2.0,
        meta("y_label")
    );

    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !c.theory.is_empty() {
            let pts: Vec<String> = c
                .theory
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                pts.join(" ")
            );
        }
        for &(x, m, lo, hi) in &c.empirical {
            let (px, py) = (sx(x), sy(m));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/><path d="M{:.2} {py:.2}h8M{px:.2} {:.2}v8" stroke="{color}" stroke-width="1.5"/>"#,
                sy(lo),
                sy(hi),
                px - 4.0,
                py - 4.0
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.8"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Parses a figure CSV and renders it.
pub fn plot_from_csv(csv: &str) -> Result<String> {
    plot_table(&Table::parse(csv)?)
}
