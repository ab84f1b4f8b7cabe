//! Browser bindings for the interactive demo in `www/`.
//!
//! Each export returns JSON (or a flat `Float64Array`) so the page can draw
//! without knowing the Rust types. The plain functions in [`demo`] do the
//! work and are what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo {
    use serde_json::{json, Value};

    use torus_spread::construction::RationalityCheck;
    use torus_spread::{
        build_h, eps_dense_square, event_cloud, refine_segment_image, rotation_number, segments,
        spreading_search, Ball, CircleLift, Point, SearchMode, SearchOptions, SpreadParams,
    };

    /// Most vertices sent to the page for one curve or cloud.
    pub const DRAW_LIMIT: usize = 20_000;

    fn params(n: u32, q: u32, m: u32) -> Result<SpreadParams, String> {
        let m = (m > 0).then_some(m as u64);
        SpreadParams::resolve(n, q, m, 2f64.sqrt() - 1.0, &RationalityCheck::default())
            .map_err(|e| e.to_string())
    }

    /// Every `len / limit`-th point, flattened to `[x0, y0, x1, y1, ...]`,
    /// always keeping the last one.
    pub fn decimate(points: &[Point], limit: usize) -> Vec<f64> {
        let stride = points.len().div_ceil(limit.max(1)).max(1);
        let mut out: Vec<f64> = points
            .iter()
            .step_by(stride)
            .flat_map(|p| [p.x, p.y])
            .collect();
        if let Some(last) = points.last() {
            if !(points.len() - 1).is_multiple_of(stride) {
                out.extend([last.x, last.y]);
            }
        }
        out
    }

    /// Image of the short vertical-landing segment under `ĥ`, with its
    /// `1/n`-density verdict over the square of half-side `n`.
    pub fn segment_image(n: u32, q: u32, m: u32, tol: f64) -> Result<Value, String> {
        let p = params(n, q, m)?;
        let h = build_h(&p);
        let (_, j) = segments(&p);
        let line = refine_segment_image(&h, j.a, j.b, tol).map_err(|e| e.to_string())?;
        let eps = p.scale();
        let verdict = eps_dense_square(
            &line.clone().into_cloud(),
            Point::ORIGIN,
            n as f64,
            eps,
            eps / 4.0,
        )
        .map_err(|e| e.to_string())?;
        Ok(json!({
            "params": p.record(),
            "delta": p.delta(),
            "vertices": line.len(),
            "density": verdict,
            "points": decimate(&line.points, DRAW_LIMIT),
        }))
    }

    /// A certified spreading event for the ball of radius `1/n` at
    /// `(cx, cy)`, with the (thinned) image cloud it was judged on.
    pub fn spreading_event(
        n: u32,
        q: u32,
        m: u32,
        cx: f64,
        cy: f64,
        direct: bool,
    ) -> Result<Value, String> {
        let p = params(n, q, m)?;
        let source = Ball::new(Point::new(cx, cy), p.scale()).map_err(|e| e.to_string())?;
        let options = SearchOptions {
            mode: if direct {
                SearchMode::Direct
            } else {
                SearchMode::Pipeline
            },
            ..SearchOptions::default()
        };
        let cert = spreading_search(&p, &source, &options).map_err(|e| e.to_string())?;
        let cloud = event_cloud(&p, &cert, &options).map_err(|e| e.to_string())?;
        // Only the part near the target ball is worth drawing.
        let near: Vec<Point> = cloud
            .points()
            .iter()
            .copied()
            .filter(|z| z.distance(cert.target_ball.center) <= 1.5 * cert.target_ball.radius)
            .collect();
        Ok(json!({
            "certificate": cert,
            "points": decimate(&near, DRAW_LIMIT),
        }))
    }

    /// Arnold-family rotation numbers at `samples` equally spaced `ω` in `[0, 1]`.
    pub fn devils_staircase(
        coupling: f64,
        samples: u32,
        iterations: u32,
    ) -> Result<Vec<f64>, String> {
        let samples = samples.max(2);
        (0..samples)
            .map(|i| {
                let omega = i as f64 / (samples - 1) as f64;
                let lift = CircleLift::arnold(omega, coupling).map_err(|e| e.to_string())?;
                Ok(rotation_number(&lift, iterations.max(1) as u64, 0.0).estimate)
            })
            .collect()
    }
}

fn to_js(result: Result<serde_json::Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// JSON: `params`, `delta`, `vertices`, `density` and flat `points`.
/// `m = 0` picks the smallest admissible amplitude.
#[wasm_bindgen(js_name = segmentImage)]
pub fn segment_image(n: u32, q: u32, m: u32, tol: f64) -> Result<String, JsError> {
    to_js(demo::segment_image(n, q, m, tol))
}

/// JSON: `certificate` and flat `points` near the target ball.
#[wasm_bindgen(js_name = spreadingEvent)]
pub fn spreading_event(
    n: u32,
    q: u32,
    m: u32,
    cx: f64,
    cy: f64,
    direct: bool,
) -> Result<String, JsError> {
    to_js(demo::spreading_event(n, q, m, cx, cy, direct))
}

#[wasm_bindgen(js_name = devilsStaircase)]
pub fn devils_staircase(coupling: f64, samples: u32, iterations: u32) -> Result<Vec<f64>, JsError> {
    demo::devils_staircase(coupling, samples, iterations).map_err(|e| JsError::new(&e))
}
