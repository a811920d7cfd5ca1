//! CSV tables and SVG charts for pipeline artifacts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `feature,<value_header>,rank` sorted by value descending; rank starts at 1.
pub fn ranked_csv(names: &[String], values: &[f64], value_header: &str) -> String {
    let order = crate::explain::rank_descending(values);
    let mut out = format!("feature,{value_header},rank\n");
    for (rank, &i) in order.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", names[i], values[i], rank + 1);
    }
    out
}

/// Horizontal bar chart, one bar per `(label, value)`, drawn in the given order.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let width = 720.0;
    let label_w = 220.0;
    let bar_h = 22.0;
    let top = 40.0;
    let height = top + bars.len() as f64 * (bar_h + 6.0) + 20.0;
    let max = bars.iter().map(|b| b.1.abs()).fold(0.0, f64::max);
    let scale = if max > 0.0 { (width - label_w - 80.0) / max } else { 0.0 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape_xml(title)
    );
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = top + i as f64 * (bar_h + 6.0);
        let w = value.abs() * scale;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            label_w - 8.0,
            y + bar_h * 0.7,
            escape_xml(label)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{label_w}" y="{y}" width="{w:.3}" height="{bar_h}" fill="#1f77b4"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{}" font-family="sans-serif" font-size="11">{value:.4e}</text>"#,
            label_w + w + 4.0,
            y + bar_h * 0.7
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Two-series line chart: the first series solid, the second dashed.
pub fn line_chart_svg(title: &str, labels: (&str, &str), a: &[f64], b: &[f64]) -> String {
    let (width, height) = (800.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let n = a.len().max(b.len());
    let all = a.iter().chain(b).copied().filter(|v| v.is_finite());
    let (lo, hi) = all.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x_of = |i: usize| left + (width - left - right) * if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    let y_of = |v: f64| top + (height - top - bottom) * (1.0 - (v - lo) / span);
    let points = |s: &[f64]| {
        s.iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.3},{:.3}", x_of(i), y_of(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape_xml(title)
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{left}" y1="{0:.3}" x2="{1}" y2="{0:.3}" stroke="#999" stroke-width="1"/>"##,
        y_of(0.0),
        width - right
    );
    for (v, anchor) in [(lo, height - bottom), (hi, top)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor:.3}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.4}</text>"#,
            left - 6.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
        points(a)
    );
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#ff7f0e" stroke-width="2" stroke-dasharray="6,4" points="{}"/>"##,
        points(b)
    );
    let legend_y = height - 18.0;
    let _ = writeln!(
        svg,
        r##"<text x="{left}" y="{legend_y}" font-family="sans-serif" font-size="12" fill="#1f77b4">{} (solid)</text>"##,
        escape_xml(labels.0)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{legend_y}" font-family="sans-serif" font-size="12" fill="#ff7f0e">{} (dashed)</text>"##,
        left + 260.0,
        escape_xml(labels.1)
    );
    svg.push_str("</svg>\n");
    svg
}
