//! Evidence against invariant foliations.
//!
//! An invariant foliation would trap the iterates of a fundamental strip
//! inside strips of bounded width in some direction. [`width_growth_certificate`]
//! checks the opposite on a finite set of directions: iterates of a unit
//! horizontal segment eventually exceed a width threshold in every tested
//! direction. This is weaker than ruling out all foliations; it rules out
//! confinement for the listed directions and the sampled segment only.
//!
//! [`rotation_number`] estimates the rotation number of a degree-one circle
//! lift with the classical bound `|f̂ⁿ(y) − y − nρ| ≤ 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{check_unit, refine_segment_image, width_of, GeometryError};
use crate::par;
use crate::torus_maps::{MapExpr, Point};

/// `count` unit vectors at angles `jπ/count`.
pub fn default_directions(count: usize) -> Vec<Point> {
    (0..count)
        .map(|j| {
            let t = j as f64 * PI / count as f64;
            Point::new(t.cos(), t.sin())
        })
        .collect()
}

/// The horizontal unit segment `[0, 1] × {0}` used as the sampled window.
pub fn unit_window() -> (Point, Point) {
    (Point::ORIGIN, Point::new(1.0, 0.0))
}

/// Twice the largest initial width of the window over `directions`.
pub fn default_threshold(directions: &[Point]) -> f64 {
    let (a, b) = unit_window();
    2.0 * directions
        .iter()
        .map(|u| width_of(&[a, b], *u))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthRecord {
    /// First iterate whose width exceeded the threshold.
    pub k: Option<u64>,
    /// Width at that iterate, or the largest width seen when none did.
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a: Point,
    pub b: Point,
    pub samples: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthCertificate {
    pub kind: String,
    pub map: String,
    pub directions: Vec<Point>,
    pub threshold: f64,
    pub records: Vec<WidthRecord>,
    pub pass: bool,
    pub k_max: u64,
    pub window: Window,
}

/// Iterates the unit horizontal window under `e` and records, per
/// direction, the first `k ≤ k_max` where the sampled image is wider than
/// `threshold`. Sample points lie on the true image, so recorded widths are
/// lower bounds for the widths of the iterated segment.
pub fn width_growth_certificate(
    e: &MapExpr,
    directions: &[Point],
    threshold: f64,
    k_max: u64,
    window_tol: f64,
) -> Result<WidthCertificate, GeometryError> {
    if directions.is_empty() {
        return Err(GeometryError::InvalidArgument("no directions given".into()));
    }
    for u in directions {
        check_unit(*u)?;
    }
    let (a, b) = unit_window();
    let window = refine_segment_image(&MapExpr::identity(), a, b, window_tol)?;
    let seeds = window.points;

    let mut records = vec![
        WidthRecord {
            k: None,
            width: f64::NEG_INFINITY,
        };
        directions.len()
    ];
    for k in 1..=k_max {
        let images = par::map_collect(&seeds, |p| e.iterate(*p, k));
        let images = images.into_iter().collect::<Result<Vec<_>, _>>()?;
        let widths = par::map_collect(directions, |u| width_of(&images, *u));
        for (rec, w) in records.iter_mut().zip(widths) {
            if rec.k.is_some() {
                continue;
            }
            if w > threshold {
                *rec = WidthRecord {
                    k: Some(k),
                    width: w,
                };
            } else {
                rec.width = rec.width.max(w);
            }
        }
        if records.iter().all(|r| r.k.is_some()) {
            break;
        }
    }
    let pass = records.iter().all(|r| r.k.is_some());
    Ok(WidthCertificate {
        kind: "widths".into(),
        map: e.to_string(),
        directions: directions.to_vec(),
        threshold,
        records,
        pass,
        k_max,
        window: Window {
            a,
            b,
            samples: seeds.len(),
            spacing: window.tolerance,
        },
    })
}

/// Degree-one lift of an orientation-preserving circle homeomorphism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CircleLift {
    /// `x ↦ x + ω`
    Rigid { omega: f64 },
    /// `x ↦ x + ω + (ε/2π)·sin(2πx)`, `|ε| < 1`
    Arnold { omega: f64, coupling: f64 },
}

impl CircleLift {
    pub fn arnold(omega: f64, coupling: f64) -> Result<Self, GeometryError> {
        if coupling.is_nan() || coupling.abs() >= 1.0 || !omega.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "Arnold family needs |coupling| < 1, got {coupling}"
            )));
        }
        Ok(CircleLift::Arnold { omega, coupling })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            CircleLift::Rigid { omega } => x + omega,
            CircleLift::Arnold { omega, coupling } => {
                x + omega + coupling / (2.0 * PI) * (2.0 * PI * x).sin()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub kind: &'static str,
    pub lift: CircleLift,
    pub iterations: u64,
    pub y0: f64,
    pub estimate: f64,
    pub error_bound: f64,
}

/// `(f̂ⁿ(y₀) − y₀)/n` with the certified error bound `1/n`.
///
/// The orbit is carried as an integer count plus a fractional part in
/// `[0, 1)`, using `f̂(x + 1) = f̂(x) + 1`, so rounding does not grow with
/// the size of the lifted orbit.
pub fn rotation_number(f: &CircleLift, iterations: u64, y0: f64) -> RotationEstimate {
    assert!(iterations >= 1, "at least one iteration is required");
    let start = y0 - y0.floor();
    let mut frac = start;
    let mut whole: i64 = 0;
    for _ in 0..iterations {
        let y = f.eval(frac);
        let fl = y.floor();
        whole += fl as i64;
        frac = y - fl;
    }
    let displacement = whole as f64 + (frac - start);
    RotationEstimate {
        kind: "rotnum",
        lift: *f,
        iterations,
        y0,
        estimate: displacement / iterations as f64,
        error_bound: 1.0 / iterations as f64,
    }
}
