//! Minimal scatter-plot SVG: axes, one circle per point, colored by label.

use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn color(label: Option<i64>) -> &'static str {
    match label {
        Some(l) => PALETTE[l.rem_euclid(PALETTE.len() as i64) as usize],
        None => PALETTE[0],
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Plots the first two columns of a row-major `n x dim` array (a single
/// column is drawn along the x axis).
pub fn scatter(coords: &[f64], dim: usize, labels: Option<&[i64]>, title: &str) -> String {
    let n = coords.len() / dim;
    let x = |i: usize| coords[i * dim];
    let y = |i: usize| if dim > 1 { coords[i * dim + 1] } else { 0.0 };
    let (x0, x1) = span((0..n).map(x));
    let (y0, y1) = span((0..n).map(y));
    let inner = SIZE - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * inner;
    // SVG y grows downward.
    let py = |v: f64| SIZE - MARGIN - (v - y0) / (y1 - y0) * inner;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let (left, bottom, right, top) = (MARGIN, SIZE - MARGIN, SIZE - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}"/>"#
    );
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<g font-family="sans-serif" font-size="11"><text x="{left}" y="{}">{x0:.3}</text><text x="{right}" y="{}" text-anchor="end">{x1:.3}</text><text x="4" y="{bottom}">{y0:.3}</text><text x="4" y="{}">{y1:.3}</text></g>"#,
        bottom + 16.0,
        bottom + 16.0,
        top + 4.0
    );
    let _ = writeln!(out, r#"<g fill-opacity="0.8">"#);
    for i in 0..n {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            px(x(i)),
            py(y(i)),
            color(labels.map(|l| l[i]))
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let svg = scatter(
            &[0.0, 0.0, 1.0, 2.0, -1.0, 0.5],
            2,
            Some(&[0, 1, 1]),
            "a < b",
        );
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a &lt; b"));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(
            doc.descendants()
                .filter(|n| n.has_tag_name("circle"))
                .count(),
            3
        );
    }

    #[test]
    fn degenerate_extent_stays_finite() {
        let svg = scatter(&[1.0, 1.0, 1.0, 1.0], 2, None, "");
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn single_column() {
        let svg = scatter(&[0.0, 1.0, 2.0], 1, None, "");
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
