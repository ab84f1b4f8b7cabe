//! The figure: image of the short vertical segment under `ĥ`, drawn over
//! the square `[−n, n]²` and its witness grid.
//!
//! The 1000×1000 view box maps `[−n−1, n+1]²` linearly with `y` pointing
//! up. Output depends only on the inputs, so equal flags give equal bytes.

use std::fmt::Write as _;

use torus_spread::Point;

pub const VIEW: f64 = 1000.0;

/// Linear map between plane coordinates and view-box coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub half: f64,
}

impl Frame {
    pub fn for_n(n: u32) -> Self {
        Frame {
            half: n as f64 + 1.0,
        }
    }

    pub fn to_view(&self, p: Point) -> (f64, f64) {
        let s = VIEW / (2.0 * self.half);
        ((p.x + self.half) * s, (self.half - p.y) * s)
    }

    pub fn from_view(&self, x: f64, y: f64) -> Point {
        let s = VIEW / (2.0 * self.half);
        Point::new(x / s - self.half, self.half - y / s)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x.abs() <= self.half && p.y.abs() <= self.half
    }
}

/// Maximal runs of consecutive vertices inside the frame.
pub fn clip_runs(frame: &Frame, points: &[Point]) -> Vec<Vec<Point>> {
    let mut runs = Vec::new();
    let mut current = Vec::new();
    for p in points {
        if frame.contains(*p) {
            current.push(*p);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

pub struct Figure<'a> {
    pub n: u32,
    pub title: &'a str,
    pub curve: &'a [Point],
    /// Witness nodes with whether each was covered.
    pub nodes: &'a [(Point, bool)],
}

pub fn render(fig: &Figure<'_>) -> String {
    let frame = Frame::for_n(fig.n);
    let n = fig.n as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="1000" height="1000" viewBox="0 0 1000 1000">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(fig.title));
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="1000" height="1000" fill="white"/>"#
    );

    let (x0, y0) = frame.to_view(Point::new(-n, n));
    let (x1, y1) = frame.to_view(Point::new(n, -n));
    let _ = writeln!(
        out,
        r#"<rect class="square" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(x1 - x0),
        fmt(y1 - y0)
    );

    let _ = writeln!(out, r#"<g class="witness-grid" stroke="none">"#);
    for (p, covered) in fig.nodes {
        let (x, y) = frame.to_view(*p);
        let colour = if *covered { "#2a9d3a" } else { "#d62828" };
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="3" fill="{colour}"/>"#,
            fmt(x),
            fmt(y)
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(
        out,
        r##"<g class="curve" fill="none" stroke="#1d4e89" stroke-width="1">"##
    );
    for run in clip_runs(&frame, fig.curve) {
        out.push_str("<polyline points=\"");
        for (i, p) in run.iter().enumerate() {
            let (x, y) = frame.to_view(*p);
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{},{}", fmt(x), fmt(y));
        }
        out.push_str("\"/>\n");
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

/// Six decimals in view units, well below the curve tolerance.
fn fmt(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Vertices of every `<polyline>` in a document produced by [`render`],
/// mapped back to plane coordinates.
pub fn parse_polylines(svg: &str, n: u32) -> Vec<Vec<Point>> {
    let frame = Frame::for_n(n);
    let mut runs = Vec::new();
    for chunk in svg.split("<polyline points=\"").skip(1) {
        let Some(end) = chunk.find('"') else { continue };
        let run = chunk[..end]
            .split_whitespace()
            .filter_map(|pair| {
                let (x, y) = pair.split_once(',')?;
                Some(frame.from_view(x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        runs.push(run);
    }
    runs
}
