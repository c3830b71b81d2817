//! Bare-bones SVG output: point clouds and density heatmaps. Coordinates are
//! printed with fixed precision so reruns give identical files.

use std::fmt::Write;

use eieg_core::evalmetrics::KdeGrid;
use eieg_core::SampleBatch;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

pub struct Series<'a> {
    pub points: &'a SampleBatch,
    pub color: &'a str,
    pub label: &'a str,
}

struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Frame {
    fn fit(lo: [f64; 2], hi: [f64; 2]) -> Self {
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let pad = 0.05 * span;
        Self {
            x0: lo[0] - pad,
            y0: lo[1] - pad,
            scale: (SIZE - 2.0 * MARGIN) / (span + 2.0 * pad),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) * self.scale
    }

    // SVG y grows downward
    fn py(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.y0) * self.scale
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="16" font-family="sans-serif" font-size="12">{}</text>"#,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of the first two coordinates of each series, drawn in order.
/// Batches are finite by construction, so no point is skipped.
pub fn scatter(title: &str, series: &[Series]) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in series {
        for p in s.points.iter_rows() {
            for k in 0..2.min(p.len()) {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    if !(lo[0].is_finite() && lo[1].is_finite()) {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let frame = Frame::fit(lo, hi);
    let mut out = String::new();
    header(&mut out, title);
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(out, r#"<g fill="{}" fill-opacity="0.5">"#, s.color);
        for p in s.points.iter_rows() {
            if p.len() < 2 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#,
                frame.px(p[0]),
                frame.py(p[1])
            );
        }
        let _ = writeln!(out, "</g>");
        let ly = 32.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            SIZE - 110.0,
            ly - 4.0,
            s.color,
            SIZE - 100.0,
            ly,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

// white -> blue -> dark red
fn ramp(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, [f64; 3]); 3] = [
        (0.0, [255.0, 255.0, 255.0]),
        (0.5, [49.0, 130.0, 189.0]),
        (1.0, [165.0, 15.0, 21.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let k = if t <= 0.5 { 0 } else { 1 };
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let u = (t - t0) / (t1 - t0);
    let mix = |i: usize| (c0[i] + u * (c1[i] - c0[i])).round() as u8;
    (mix(0), mix(1), mix(2))
}

/// One rectangle per grid cell, colour scaled to the grid maximum.
pub fn heatmap(title: &str, grid: &KdeGrid) -> String {
    let e = grid.extent;
    let frame = Frame::fit([e.x_min, e.y_min], [e.x_max, e.y_max]);
    let max = grid.values.iter().cloned().fold(0.0, f64::max);
    let cw = (e.x_max - e.x_min) / grid.nx as f64 * frame.scale;
    let ch = (e.y_max - e.y_min) / grid.ny as f64 * frame.scale;
    let mut out = String::new();
    header(&mut out, title);
    out.push_str("<g shape-rendering=\"crispEdges\">\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let v = grid.at(i, j);
            let (r, g, b) = ramp(if max > 0.0 { v / max } else { 0.0 });
            let x = frame.px(e.x_min) + i as f64 * cw;
            let y = frame.py(e.y_min) - (j + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
                cw + 0.01,
                ch + 0.01
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}
