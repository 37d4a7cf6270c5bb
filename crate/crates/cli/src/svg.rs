//! Minimal SVG scatterplots: points, axes with labels, least-squares line.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Intercept and slope of the least-squares line, if `x` varies.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], labels: &[String]) -> String {
    let finite: Vec<(usize, (f64, f64))> = points
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, p)| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (x0, x1) = range(finite.iter().map(|(_, p)| p.0));
    let (y0, y1) = range(finite.iter().map(|(_, p)| p.1));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MARGIN,
        W - MARGIN,
        H - MARGIN
    );
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, pos, anchor) in [(x0, (MARGIN, H - MARGIN + 16.0), "start"), (x1, (W - MARGIN, H - MARGIN + 16.0), "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#,
            pos.0, pos.1
        );
    }
    for (v, y) in [(y0, H - MARGIN), (y1, MARGIN)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{v:.3}</text>"#,
            MARGIN - 4.0,
            y
        );
    }
    let finite_points: Vec<(f64, f64)> = finite.iter().map(|(_, p)| *p).collect();
    if let Some((a, b)) = least_squares(&finite_points) {
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue"/>"#,
            sx(x0),
            sy(a + b * x0),
            sx(x1),
            sy(a + b * x1)
        );
    }
    for (i, (x, y)) in finite {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="black"/>"#, sx(x), sy(y));
        if let Some(l) = labels.get(i) {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#,
                sx(x) + 5.0,
                sy(y) - 5.0,
                escape(l)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
