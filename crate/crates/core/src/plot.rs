//! Minimal static SVG line charts.

use std::fmt::Write;

use crate::io::Table;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(lines: &[Line]) -> Option<(f64, f64, f64, f64)> {
    let mut it = lines
        .iter()
        .flat_map(|l| l.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let &(x0, y0) = it.next()?;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (x0, x0, y0, y0);
    for &(x, y) in it {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymin -= 0.5;
        ymax += 0.5;
    }
    Some((xmin, xmax, ymin, ymax))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `lines` into a standalone SVG document. Empty input gives bare
/// axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, lines: &[Line]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    if let Some((xmin, xmax, ymin, ymax)) = bounds(lines) {
        let sx = |x: f64| MARGIN_LEFT + (x - xmin) / (xmax - xmin) * plot_w;
        let sy = |y: f64| MARGIN_TOP + plot_h - (y - ymin) / (ymax - ymin) * plot_h;
        for (i, v) in [(0, xmin), (1, xmax)] {
            let anchor = if i == 0 { "start" } else { "end" };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{v:.4}</text>"#,
                sx(v),
                MARGIN_TOP + plot_h + 16.0
            );
        }
        for v in [ymin, ymax] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.4}</text>"#,
                MARGIN_LEFT - 6.0,
                sy(v) + 4.0
            );
        }
        for (i, line) in lines.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut pts = String::new();
            for &(x, y) in line.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.trim_end()
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
                MARGIN_LEFT + 8.0,
                MARGIN_TOP + 16.0 + 15.0 * i as f64,
                escape(&line.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One chart per non-abscissa column of `table`, against its first column.
/// Returns `(column name, svg)` pairs in column order.
pub fn emit_plots(table: &Table, title: &str) -> Vec<(String, String)> {
    let Some(x_name) = table.header.first() else {
        return Vec::new();
    };
    table
        .header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, name)| {
            let points = table.rows.iter().map(|r| (r[0], r[i])).collect();
            let line = Line { label: name.clone(), points };
            let svg = line_chart(&format!("{title}: {name}"), x_name, name, &[line]);
            (name.clone(), svg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_gives_bare_axes() {
        let svg = line_chart("empty", "t", "y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("polyline"));
        let table = Table { header: vec!["t".into(), "p_in".into()], rows: vec![] };
        let plots = emit_plots(&table, "x");
        assert_eq!(plots.len(), 1);
        assert!(!plots[0].1.contains("polyline"));
    }

    #[test]
    fn deterministic_output() {
        let line = Line {
            label: "a".into(),
            points: (0..50).map(|i| (i as f64, (i as f64 * 0.3).sin())).collect(),
        };
        let a = line_chart("t", "x", "y", std::slice::from_ref(&line));
        let b = line_chart("t", "x", "y", &[line]);
        assert_eq!(a, b);
        assert_eq!(a.matches("polyline").count(), 1);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = line_chart("a<b", "x", "y", &[]);
        assert!(svg.contains("a&lt;b"));
    }
}
