//! Scalp topomap rendering as standalone SVG.

use std::fmt::Write;

use brainfeat_core::analysis::TopomapData;

const SIZE: f64 = 400.0;
const RADIUS: f64 = 150.0;
const GRID: usize = 48;

fn to_px(x: f64, y: f64) -> (f64, f64) {
    (SIZE / 2.0 + x * RADIUS, SIZE / 2.0 - y * RADIUS)
}

/// White to dark red.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = 255.0 - 75.0 * t;
    let gb = 255.0 * (1.0 - t);
    format!("#{:02x}{:02x}{:02x}", r as u8, gb as u8, gb as u8)
}

/// Inverse-distance weighted value at a point.
fn idw(t: &TopomapData, x: f64, y: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for e in &t.entries {
        let d2 = (e.x - x).powi(2) + (e.y - y).powi(2);
        if d2 < 1e-12 {
            return e.value;
        }
        let w = 1.0 / (d2 * d2);
        num += w * e.value;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Interpolated map of per-electrode values with electrode markers and names.
pub fn render_topomap(t: &TopomapData, title: &str) -> String {
    let max = t.entries.iter().map(|e| e.value).fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let c = SIZE / 2.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE + 40.0
    );
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="head"><circle cx="{c}" cy="{c}" r="{RADIUS}"/></clipPath></defs>"#
    );
    let _ = writeln!(s, r#"<g clip-path="url(#head)">"#);
    let cell = 2.0 * RADIUS / GRID as f64;
    for i in 0..GRID {
        for j in 0..GRID {
            let x = -1.0 + (j as f64 + 0.5) * 2.0 / GRID as f64;
            let y = 1.0 - (i as f64 + 0.5) * 2.0 / GRID as f64;
            if x * x + y * y > 1.1 {
                continue;
            }
            let (px, py) = to_px(x, y);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px - cell / 2.0,
                py - cell / 2.0,
                cell + 0.3,
                cell + 0.3,
                color(idw(t, x, y) * scale)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<circle cx="{c}" cy="{c}" r="{RADIUS}" fill="none" stroke="black" stroke-width="2"/>"#
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{},{} {},{} {},{}" fill="none" stroke="black" stroke-width="2"/>"#,
        c - 12.0,
        c - RADIUS + 2.0,
        c,
        c - RADIUS - 16.0,
        c + 12.0,
        c - RADIUS + 2.0
    );
    for e in &t.entries {
        let (px, py) = to_px(e.x, e.y);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="{}" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            color(e.value * scale),
            py - 7.0,
            e.electrode
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{c}" y="{:.0}" font-size="14" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        SIZE + 25.0,
        escape(title)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(x: &str) -> String {
    x.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use brainfeat_core::analysis::importance_topomap;
    use brainfeat_core::features::{Band, Domain, FeatureLabel};

    #[test]
    fn renders_every_electrode() {
        let labels = vec![
            FeatureLabel::single(Domain::Ft, "power", Some(Band::new(0.0, 2.5)), "T3"),
            FeatureLabel::pair(Domain::Conn, "plv", Some(Band::new(0.0, 2.5)), "O1", "O2"),
        ];
        let t = importance_topomap(&[0.7, 0.3], &labels, Band::new(0.0, 4.0)).unwrap();
        let svg = render_topomap(&t, "0-4 Hz <delta>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        for e in &t.entries {
            assert!(svg.contains(&format!(">{}</text>", e.electrode)));
        }
        assert!(svg.contains("&lt;delta&gt;"));
        assert!(svg.contains("#b40000"));
    }
}
