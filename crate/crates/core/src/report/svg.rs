//! Minimal deterministic SVG rendering.

use std::fmt::Write;

use super::{BoxStats, HeatmapData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { width: 900, height: 600 }
    }
}

const LOW: (f64, f64, f64) = (0x21 as f64, 0x66 as f64, 0xac as f64); // -100: #2166ac
const MID: (f64, f64, f64) = (0xf7 as f64, 0xf7 as f64, 0xf7 as f64); //    0: #f7f7f7
const HIGH: (f64, f64, f64) = (0xb2 as f64, 0x18 as f64, 0x2b as f64); // 100: #b2182b

/// Diverging ramp over [-100, 100]: #2166ac, #f7f7f7, #b2182b.
pub fn color_for(value: f64) -> String {
    let v = value.clamp(-100.0, 100.0) / 100.0;
    let (from, to, t) = if v < 0.0 { (MID, LOW, -v) } else { (MID, HIGH, v) };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(from.0, to.0), mix(from.1, to.1), mix(from.2, to.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, o: &SvgOptions, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = o.width,
        h = o.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
}

pub fn heatmap_svg(h: &HeatmapData, o: &SvgOptions) -> String {
    let mut out = String::new();
    header(&mut out, o, "MCC (%) by dataset and method; positive class = malware");
    let left = 160.0;
    let top = 110.0;
    let cw = ((o.width as f64 - left - 10.0) / h.columns.len().max(1) as f64).max(1.0);
    let ch = ((o.height as f64 - top - 10.0) / h.rows.len().max(1) as f64).max(1.0);
    for (c, name) in h.columns.iter().enumerate() {
        let x = left + (c as f64 + 0.5) * cw;
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="start" transform="rotate(-45 {x:.1} {y:.1})">{}</text>"#,
            escape(name),
            y = top - 6.0
        );
    }
    for (r, name) in h.rows.iter().enumerate() {
        let y = top + r as f64 * ch;
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{ty:.1}" font-size="11" text-anchor="end">{}</text>"#,
            escape(name),
            x = left - 6.0,
            ty = y + ch / 2.0 + 4.0
        );
        for (c, cell) in h.cells[r].iter().enumerate() {
            let x = left + c as f64 * cw;
            let (fill, label) = match cell {
                Some(v) => (color_for(*v), format!("{v:.2}")),
                None => ("#cccccc".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cw:.1}" height="{ch:.1}" fill="{fill}" stroke="white"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{tx:.1}" y="{ty:.1}" font-size="10" text-anchor="middle">{label}</text>"#,
                tx = x + cw / 2.0,
                ty = y + ch / 2.0 + 3.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn box_svg(b: &BoxStats, o: &SvgOptions) -> String {
    let mut out = String::new();
    header(&mut out, o, "F1 distribution by method; positive class = malware");
    let left = 50.0;
    let top = 40.0;
    let bottom = o.height as f64 - 80.0;
    let span = (bottom - top).max(1.0);
    let y_of = |v: f64| bottom - v.clamp(0.0, 1.0) * span;
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" x2="{x2}" y1="{y:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{tx}" y="{ty:.1}" font-size="10" text-anchor="end">{v:.2}</text>"##,
            x2 = o.width as f64 - 10.0,
            y = y_of(v),
            tx = left - 4.0,
            ty = y_of(v) + 3.0
        );
    }
    let w = ((o.width as f64 - left - 10.0) / b.rows.len().max(1) as f64).max(1.0);
    for (i, r) in b.rows.iter().enumerate() {
        let cx = left + (i as f64 + 0.5) * w;
        let bw = w * 0.6;
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
            y_of(r.min),
            y_of(r.max)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{bw:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            cx - bw / 2.0,
            y_of(r.q3),
            (y_of(r.q1) - y_of(r.q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="black" stroke-width="2"/>"#,
            cx - bw / 2.0,
            cx + bw / 2.0,
            y = y_of(r.median)
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{y:.1}" font-size="10" text-anchor="end" transform="rotate(-45 {cx:.1} {y:.1})">{}</text>"#,
            escape(&r.method),
            y = bottom + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
