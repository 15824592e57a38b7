use std::fmt::Write as _;

use crate::experiments::ScanResult;

/// `# config_digest=...`, the header, then one row per point.
pub fn scan_csv(scan: &ScanResult) -> String {
    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|p| vec![p.x.to_string(), p.p_g.to_string(), p.p_up.to_string(), p.p_down.to_string()])
        .collect();
    table_csv(&scan.config_digest, &["x", "p_g", "p_up", "p_down"], &rows)
}

pub fn table_csv(digest: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# config_digest={digest}\n{}\n", header.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line chart with one polyline per series.
pub fn svg_line_chart(title: &str, x_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<polyline points="{m},{} {m},{m}" fill="none" stroke="black"/><line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - m,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{y0:.3}</text>"#, 5.0, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{y1:.3}</text>"#, 5.0, m);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, coords.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 60.0,
            m + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
