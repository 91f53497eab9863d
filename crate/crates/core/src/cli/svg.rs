//! Minimal self-contained SVG line plots. The plotted numbers are repeated
//! in XML comments so that plots diff cleanly.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// Non-finite points are skipped.
    pub points: Vec<(f64, f64)>,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub series: Vec<Series<'a>>,
    /// Vertical marker, e.g. an admissibility threshold.
    pub marker: Option<(f64, &'a str)>,
    pub zero_line: bool,
}

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 260.0;
const PAD: f64 = 48.0;

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-300 {
        let w = lo.abs().max(1.0) * 0.5;
        return Some((lo - w, hi + w));
    }
    let pad = 0.05 * (hi - lo);
    Some((lo - pad, hi + pad))
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e4) {
        format!("{:.4}", v)
    } else {
        format!("{:.3e}", v)
    }
}

pub fn render(title: &str, x_label: &str, panels: &[Panel<'_>]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64 + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>"#,
        WIDTH / 2.0
    );
    for (i, panel) in panels.iter().enumerate() {
        let top = 30.0 + PANEL_HEIGHT * i as f64;
        draw_panel(&mut s, panel, top, x_label);
    }
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, panel: &Panel<'_>, top: f64, x_label: &str) {
    let all = || panel.series.iter().flat_map(|se| se.points.iter().copied());
    let xr = range(all().map(|p| p.0).chain(panel.marker.map(|m| m.0)));
    let yr = range(all().map(|p| p.1).chain(panel.zero_line.then_some(0.0)));
    for se in &panel.series {
        let _ = writeln!(s, "<!-- data {} / {}: x,y -->", panel.title, se.label);
        for (x, y) in &se.points {
            let _ = writeln!(s, "<!-- {x},{y} -->");
        }
    }
    let (x0, x1) = (PAD, WIDTH - 16.0);
    let (y0, y1) = (top + PANEL_HEIGHT - 36.0, top + 16.0);
    let _ = writeln!(
        s,
        r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, top + 10.0, panel.title);
    let (Some((xa, xb)), Some((ya, yb))) = (xr, yr) else {
        let _ = writeln!(s, r#"<text x="{}" y="{}">no finite data</text>"#, x0 + 8.0, y1 + 20.0);
        return;
    };
    let px = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
    let py = |y: f64| y0 - (y - ya) / (yb - ya) * (y0 - y1);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 + 14.0, fmt_num(xa));
    let _ = writeln!(
        s,
        r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
        y0 + 14.0,
        fmt_num(xb)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        y0 + 26.0
    );
    let _ = writeln!(s, r#"<text x="2" y="{}">{}</text>"#, y1 + 4.0, fmt_num(yb));
    let _ = writeln!(s, r#"<text x="2" y="{y0}">{}</text>"#, fmt_num(ya));
    if panel.zero_line && ya < 0.0 && yb > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" x2="{x1}" y1="{0}" y2="{0}" stroke="#bbb"/>"##,
            py(0.0)
        );
    }
    if let Some((m, label)) = panel.marker {
        let _ = writeln!(
            s,
            r##"<line x1="{0}" x2="{0}" y1="{y1}" y2="{y0}" stroke="#c00" stroke-dasharray="4 3"/><text x="{0}" y="{1}" fill="#c00"> {label}</text>"##,
            px(m),
            y1 + 12.0
        );
    }
    for (k, se) in panel.series.iter().enumerate() {
        let pts: Vec<String> = se
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            se.color,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            x1 - 140.0,
            y1 + 14.0 + 12.0 * k as f64,
            se.color,
            se.label
        );
    }
}
