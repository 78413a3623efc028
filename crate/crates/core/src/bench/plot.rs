//! Minimal SVG output: embedding scatter plots and per-method box plots.

use std::fmt::Write;

use super::report::{Distribution, RunStatus, SummaryRow};
use crate::error::{Error, Result};
use crate::grid::PointCloud;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Scatter plot of a 2-D embedding. With `columns` set, row `p` is the grid
/// node (p / columns, p % columns): red grows with the first index and blue
/// with the second.
pub fn scatter_svg(y: &PointCloud, columns: Option<usize>) -> Result<String> {
    if y.dim() != 2 {
        return Err(Error::Argument(format!(
            "scatter plots need a 2-D embedding, got {} columns; score higher-dimensional output with `score` instead",
            y.dim()
        )));
    }
    let n = y.len();
    let cols = columns.unwrap_or_else(|| {
        let r = (n as f64).sqrt().round() as usize;
        if r * r == n {
            r
        } else {
            n
        }
    });
    if cols == 0 || !n.is_multiple_of(cols) {
        return Err(Error::Argument(format!(
            "{n} rows do not form a grid with {cols} columns"
        )));
    }
    let rows = n / cols;
    let (xs, ys) = (y.column(0), y.column(1));
    let bounds = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    };
    let ((x0, x1), (y0, y1)) = (bounds(&xs), bounds(&ys));
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let mut svg = header(SIZE, SIZE);
    for p in 0..n {
        let (i, j) = (p / cols, p % cols);
        let red = (255.0 * i as f64 / (rows.max(2) - 1) as f64).round();
        let blue = (255.0 * j as f64 / (cols.max(2) - 1) as f64).round();
        let cx = MARGIN + (xs[p] - x0) * scale;
        let cy = SIZE - MARGIN - (ys[p] - y0) * scale;
        writeln!(
            svg,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"2.5\" fill=\"rgb({red},64,{blue})\"/>"
        )
        .expect("writing to a String");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Box plot of successful scores per method (log10 scale), methods in
/// order of first appearance.
pub fn box_svg(rows: &[SummaryRow]) -> Result<String> {
    let mut methods: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        let idx = match methods.iter().position(|(m, _)| *m == r.method) {
            Some(i) => i,
            None => {
                methods.push((r.method.clone(), Vec::new()));
                methods.len() - 1
            }
        };
        if let (RunStatus::Ok, Some(s)) = (r.status, r.score) {
            if s > 0.0 && s.is_finite() {
                methods[idx].1.push(s.log10());
            }
        }
    }
    if methods.is_empty() {
        return Err(Error::Argument("summary has no rows".into()));
    }
    let dists: Vec<(String, Option<Distribution>)> =
        methods.into_iter().map(|(m, v)| (m, Distribution::of(&v))).collect();
    let (lo, hi) = dists
        .iter()
        .filter_map(|(_, d)| d.as_ref())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| {
            (a.min(d.min), b.max(d.max))
        });
    let (lo, hi) = if lo.is_finite() {
        (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
    } else {
        (0.0, 1.0)
    };
    let slot = 90.0;
    let width = 2.0 * MARGIN + 40.0 + slot * dists.len() as f64;
    let height = SIZE;
    let ypos = |v: f64| height - 2.0 * MARGIN - (v - lo) / (hi - lo) * (height - 3.0 * MARGIN);
    let mut svg = header(width, height);
    for e in (lo as i64)..=(hi as i64) {
        let y = ypos(e as f64);
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{y:.3}\" font-size=\"10\" text-anchor=\"end\">1e{e}</text>",
            MARGIN + 30.0
        )
        .expect("writing to a String");
    }
    for (k, (method, dist)) in dists.iter().enumerate() {
        let cx = MARGIN + 40.0 + slot * (k as f64 + 0.5);
        let label = method
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;");
        writeln!(
            svg,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{label}</text>",
            height - MARGIN
        )
        .expect("writing to a String");
        if let Some(d) = dist {
            let (w, top, bottom) = (slot * 0.3, ypos(d.q3), ypos(d.q1));
            writeln!(
                svg,
                "<g class=\"box\" data-method=\"{label}\">\n\
                 <line x1=\"{cx:.1}\" y1=\"{:.3}\" x2=\"{cx:.1}\" y2=\"{:.3}\" stroke=\"black\"/>\n\
                 <rect x=\"{:.1}\" y=\"{top:.3}\" width=\"{:.1}\" height=\"{:.3}\" fill=\"#9ecae1\" stroke=\"black\"/>\n\
                 <line x1=\"{:.1}\" y1=\"{:.3}\" x2=\"{:.1}\" y2=\"{:.3}\" stroke=\"black\" stroke-width=\"2\"/>\n\
                 </g>",
                ypos(d.max),
                ypos(d.min),
                cx - w,
                2.0 * w,
                bottom - top,
                cx - w,
                ypos(d.median),
                cx + w,
                ypos(d.median),
            )
            .expect("writing to a String");
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
