//! Exact lifts of torus maps homotopic to the identity.
//!
//! A [`MapExpr`] is a composition tree of closed-form primitives: vertical and
//! horizontal cosine shears and translations. All of them commute with integer
//! translations and have closed-form inverses, so evaluation never needs root
//! finding and conjugations `h ∘ T_v ∘ h⁻¹` can be iterated in one step.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

/// Pointwise norm used inside the band norm: `√(|g₁|² + |g₂|²)`.
pub const POINTWISE_NORM: &str = "euclidean";

/// Step used by [`MapExpr::numeric_jacobian`] unless overridden.
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("non-finite input point ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("coordinates overflowed at iterate {iterate}")]
    Overflow { iterate: u64 },
    #[error("iterate count must be at least 1")]
    ZeroIterate,
    #[error("invalid band-norm query: {0}")]
    InvalidQuery(String),
}

/// A point (or vector) of the plane; the torus is its quotient by `ℤ²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation `self + t (other - self)`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Row-major 2×2 matrix.
pub type Jacobian = [[f64; 2]; 2];

const IDENTITY_JACOBIAN: Jacobian = [[1.0, 0.0], [0.0, 1.0]];

fn mat_mul(a: &Jacobian, b: &Jacobian) -> Jacobian {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// `2π·freq·t` reduced modulo `2π`. The first reduction is exact, so
/// arguments differing by an integer give identical phases.
fn phase(freq: u32, t: f64) -> f64 {
    let s = t - t.floor();
    let u = freq as f64 * s;
    2.0 * PI * (u - u.floor())
}

pub fn determinant(j: &Jacobian) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Operator (spectral) norm of a 2×2 matrix.
pub fn operator_norm(j: &Jacobian) -> f64 {
    let frob2 = j.iter().flatten().map(|v| v * v).sum::<f64>();
    let det = determinant(j);
    let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
    ((frob2 + disc) / 2.0).sqrt()
}

/// Symbolic lift of a torus map homotopic to the identity.
///
/// `Compose` applies its members right-to-left, so `Compose([a, b])` is `a ∘ b`.
#[derive(Clone, Debug, PartialEq)]
pub enum MapExpr {
    /// `(x, y) ↦ (x, y + amplitude·cos(2π·freq·x))`
    VShear {
        amplitude: i64,
        freq: u32,
    },
    /// `(x, y) ↦ (x + amplitude·cos(2π·freq·y), y)`
    HShear {
        amplitude: i64,
        freq: u32,
    },
    Translate(Point),
    Compose(Vec<MapExpr>),
    Inverse(Box<MapExpr>),
}

impl MapExpr {
    pub fn vshear(amplitude: i64, freq: u32) -> Self {
        assert!(freq > 0, "shear frequency must be positive");
        MapExpr::VShear { amplitude, freq }
    }

    pub fn hshear(amplitude: i64, freq: u32) -> Self {
        assert!(freq > 0, "shear frequency must be positive");
        MapExpr::HShear { amplitude, freq }
    }

    pub fn translate(x: f64, y: f64) -> Self {
        MapExpr::Translate(Point::new(x, y))
    }

    pub fn identity() -> Self {
        MapExpr::Compose(Vec::new())
    }

    /// `a ∘ b`.
    pub fn compose(a: MapExpr, b: MapExpr) -> Self {
        MapExpr::Compose(vec![a, b])
    }

    /// `h ∘ g ∘ h⁻¹`, kept in a shape that [`MapExpr::iterate`] recognises.
    pub fn conjugate(h: MapExpr, g: MapExpr) -> Self {
        let h_inv = h.inverse();
        MapExpr::Compose(vec![h, g, h_inv])
    }

    /// Closed-form inverse. Primitives negate their parameter, compositions
    /// are reversed and inverted element-wise, and double inversions cancel.
    pub fn inverse(&self) -> MapExpr {
        match self {
            MapExpr::VShear { amplitude, freq } => MapExpr::VShear {
                amplitude: -amplitude,
                freq: *freq,
            },
            MapExpr::HShear { amplitude, freq } => MapExpr::HShear {
                amplitude: -amplitude,
                freq: *freq,
            },
            MapExpr::Translate(v) => MapExpr::Translate(-*v),
            MapExpr::Compose(items) => {
                MapExpr::Compose(items.iter().rev().map(MapExpr::inverse).collect())
            }
            MapExpr::Inverse(inner) => (**inner).clone(),
        }
    }

    /// Evaluates the lift at `z`.
    pub fn eval(&self, z: Point) -> Result<Point, MapError> {
        check_finite(z)?;
        Ok(self.apply(z))
    }

    /// Evaluates the inverse lift at `z`.
    pub fn eval_inverse(&self, z: Point) -> Result<Point, MapError> {
        check_finite(z)?;
        Ok(self.apply_inverse(z))
    }

    /// Unchecked evaluation; non-finite inputs propagate.
    pub fn apply(&self, z: Point) -> Point {
        match self {
            MapExpr::VShear { amplitude, freq } => {
                Point::new(z.x, z.y + *amplitude as f64 * phase(*freq, z.x).cos())
            }
            MapExpr::HShear { amplitude, freq } => {
                Point::new(z.x + *amplitude as f64 * phase(*freq, z.y).cos(), z.y)
            }
            MapExpr::Translate(v) => z + *v,
            MapExpr::Compose(items) => items.iter().rev().fold(z, |p, e| e.apply(p)),
            MapExpr::Inverse(inner) => inner.apply_inverse(z),
        }
    }

    pub fn apply_inverse(&self, z: Point) -> Point {
        match self {
            MapExpr::VShear { amplitude, freq } => {
                Point::new(z.x, z.y - *amplitude as f64 * phase(*freq, z.x).cos())
            }
            MapExpr::HShear { amplitude, freq } => {
                Point::new(z.x - *amplitude as f64 * phase(*freq, z.y).cos(), z.y)
            }
            MapExpr::Translate(v) => z - *v,
            MapExpr::Compose(items) => items.iter().fold(z, |p, e| e.apply_inverse(p)),
            MapExpr::Inverse(inner) => inner.apply(z),
        }
    }

    /// Image and analytic Jacobian at `z`, chained through compositions.
    pub fn apply_with_jacobian(&self, z: Point) -> (Point, Jacobian) {
        match self {
            MapExpr::VShear { amplitude, freq } => {
                let w = 2.0 * PI * *freq as f64;
                let a = *amplitude as f64;
                let t = phase(*freq, z.x);
                let image = Point::new(z.x, z.y + a * t.cos());
                (image, [[1.0, 0.0], [-a * w * t.sin(), 1.0]])
            }
            MapExpr::HShear { amplitude, freq } => {
                let w = 2.0 * PI * *freq as f64;
                let a = *amplitude as f64;
                let t = phase(*freq, z.y);
                let image = Point::new(z.x + a * t.cos(), z.y);
                (image, [[1.0, -a * w * t.sin()], [0.0, 1.0]])
            }
            MapExpr::Translate(v) => (z + *v, IDENTITY_JACOBIAN),
            MapExpr::Compose(items) => {
                items
                    .iter()
                    .rev()
                    .fold((z, IDENTITY_JACOBIAN), |(p, acc), e| {
                        let (image, j) = e.apply_with_jacobian(p);
                        (image, mat_mul(&j, &acc))
                    })
            }
            MapExpr::Inverse(inner) => inner.inverse().apply_with_jacobian(z),
        }
    }

    pub fn jacobian(&self, z: Point) -> Jacobian {
        self.apply_with_jacobian(z).1
    }

    /// Central-difference Jacobian with the given step.
    pub fn numeric_jacobian(&self, z: Point, step: f64) -> Jacobian {
        let dx = Point::new(step, 0.0);
        let dy = Point::new(0.0, step);
        let cx = (self.apply(z + dx) - self.apply(z - dx)) * (0.5 / step);
        let cy = (self.apply(z + dy) - self.apply(z - dy)) * (0.5 / step);
        [[cx.x, cy.x], [cx.y, cy.y]]
    }

    /// Holomorphic extension of the lift to `ℂ²`.
    pub fn apply_complex(&self, z: [Complex64; 2]) -> [Complex64; 2] {
        match self {
            MapExpr::VShear { amplitude, freq } => {
                let w = 2.0 * PI * *freq as f64;
                [z[0], z[1] + *amplitude as f64 * (z[0] * w).cos()]
            }
            MapExpr::HShear { amplitude, freq } => {
                let w = 2.0 * PI * *freq as f64;
                [z[0] + *amplitude as f64 * (z[1] * w).cos(), z[1]]
            }
            MapExpr::Translate(v) => [z[0] + v.x, z[1] + v.y],
            MapExpr::Compose(items) => items.iter().rev().fold(z, |p, e| e.apply_complex(p)),
            MapExpr::Inverse(inner) => inner.inverse().apply_complex(z),
        }
    }

    /// Periodic part `g(z) = f̂(z) − z` of the holomorphic extension.
    pub fn periodic_part_complex(&self, z: [Complex64; 2]) -> [Complex64; 2] {
        let image = self.apply_complex(z);
        [image[0] - z[0], image[1] - z[1]]
    }

    /// Certified Lipschitz constant: `1 + 2π·freq·|amplitude|` per shear,
    /// 1 per translation, multiplied through compositions.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            MapExpr::VShear { amplitude, freq } | MapExpr::HShear { amplitude, freq } => {
                1.0 + 2.0 * PI * *freq as f64 * amplitude.unsigned_abs() as f64
            }
            MapExpr::Translate(_) => 1.0,
            MapExpr::Compose(items) => items.iter().map(MapExpr::lipschitz_bound).product(),
            MapExpr::Inverse(inner) => inner.lipschitz_bound(),
        }
    }

    /// Recognises `Compose([h, Translate(v), h⁻¹])`.
    pub fn as_conjugated_translation(&self) -> Option<(&MapExpr, Point, &MapExpr)> {
        let MapExpr::Compose(items) = self else {
            return None;
        };
        let [h, MapExpr::Translate(v), h_inv] = items.as_slice() else {
            return None;
        };
        let matches = match h_inv {
            MapExpr::Inverse(inner) => **inner == *h,
            other => *other == h.inverse(),
        };
        matches.then_some((h, *v, h_inv))
    }

    /// The `k`-th iterate at `z`. Conjugated translations take the one-step
    /// path `h(h⁻¹(z) + k·v)`; everything else is iterated point by point.
    pub fn iterate(&self, z: Point, k: u64) -> Result<Point, MapError> {
        check_finite(z)?;
        if k == 0 {
            return Err(MapError::ZeroIterate);
        }
        match self.as_conjugated_translation() {
            Some((h, v, h_inv)) => {
                let image = h.apply(h_inv.apply(z) + v * k as f64);
                if image.is_finite() {
                    Ok(image)
                } else {
                    Err(MapError::Overflow { iterate: k })
                }
            }
            None => self.iterate_naive(z, k),
        }
    }

    /// Point-by-point iteration, ignoring any conjugacy structure.
    pub fn iterate_naive(&self, z: Point, k: u64) -> Result<Point, MapError> {
        check_finite(z)?;
        if k == 0 {
            return Err(MapError::ZeroIterate);
        }
        let mut p = z;
        for i in 1..=k {
            p = self.apply(p);
            if !p.is_finite() {
                return Err(MapError::Overflow { iterate: i });
            }
        }
        Ok(p)
    }

    /// Tolerance within which [`MapExpr::iterate`] and
    /// [`MapExpr::iterate_naive`] must agree after `k` steps.
    pub fn iterate_tolerance(&self, k: u64, unit: f64) -> f64 {
        unit * self.lipschitz_bound().powf(k as f64)
    }

    /// Closed-form band norm for single primitives.
    pub fn closed_form_band_norm(&self, rho: f64) -> Option<f64> {
        match self {
            MapExpr::VShear { amplitude, freq } | MapExpr::HShear { amplitude, freq } => {
                Some(amplitude.unsigned_abs() as f64 * (2.0 * PI * *freq as f64 * rho).cosh())
            }
            MapExpr::Translate(v) => Some(v.norm()),
            MapExpr::Compose(items) => match items.as_slice() {
                [] => Some(0.0),
                [single] => single.closed_form_band_norm(rho),
                _ => None,
            },
            MapExpr::Inverse(inner) => inner.closed_form_band_norm(rho),
        }
    }

    /// `‖f̂ − id‖_ρ`: closed form for primitives, boundary-grid supremum otherwise.
    pub fn band_norm(&self, query: &BandNormQuery) -> f64 {
        self.closed_form_band_norm(query.rho)
            .unwrap_or_else(|| self.band_norm_grid(query))
    }

    /// Supremum of the periodic part over the boundary grid of the band.
    /// The maximum principle puts the supremum on `|Im z| = |Im w| = ρ`, and
    /// periodicity restricts the real parts to `[0, 1)²`.
    pub fn band_norm_grid(&self, query: &BandNormQuery) -> f64 {
        let samples = query.boundary_samples();
        let norms = par::map_collect(&samples, |z| complex_norm(self.periodic_part_complex(*z)));
        par::max_f64(norms)
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapExpr::VShear { amplitude, freq } => write!(f, "vshear({amplitude},{freq})"),
            MapExpr::HShear { amplitude, freq } => write!(f, "hshear({amplitude},{freq})"),
            MapExpr::Translate(v) => write!(f, "translate({},{})", v.x, v.y),
            MapExpr::Compose(items) if items.is_empty() => write!(f, "identity"),
            MapExpr::Compose(items) => {
                write!(f, "compose[")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
            MapExpr::Inverse(inner) => write!(f, "inverse({inner})"),
        }
    }
}

fn check_finite(z: Point) -> Result<(), MapError> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(MapError::NonFinite { x: z.x, y: z.y })
    }
}

fn complex_norm(g: [Complex64; 2]) -> f64 {
    (g[0].norm_sqr() + g[1].norm_sqr()).sqrt()
}

/// Parameters of a band-norm evaluation over `{|Im z| ≤ ρ, |Im w| ≤ ρ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandNormQuery {
    pub rho: f64,
    pub grid_density: u32,
}

impl BandNormQuery {
    pub const MIN_GRID_DENSITY: u32 = 16;

    /// `rho = 0` is accepted and gives the real supremum norm.
    pub fn new(rho: f64, grid_density: u32) -> Result<Self, MapError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(MapError::InvalidQuery(format!(
                "rho must be finite and non-negative, got {rho}"
            )));
        }
        if grid_density < Self::MIN_GRID_DENSITY {
            return Err(MapError::InvalidQuery(format!(
                "grid density must be at least {}, got {grid_density}",
                Self::MIN_GRID_DENSITY
            )));
        }
        Ok(BandNormQuery { rho, grid_density })
    }

    fn imaginary_offsets(&self) -> Vec<(f64, f64)> {
        if self.rho == 0.0 {
            vec![(0.0, 0.0)]
        } else {
            let r = self.rho;
            vec![(-r, -r), (-r, r), (r, -r), (r, r)]
        }
    }

    /// Points of the distinguished boundary with real parts on a
    /// `grid_density × grid_density` grid of the unit square.
    pub fn boundary_samples(&self) -> Vec<[Complex64; 2]> {
        let d = self.grid_density as usize;
        let offsets = self.imaginary_offsets();
        let mut out = Vec::with_capacity(d * d * offsets.len());
        for &(iz, iw) in &offsets {
            for i in 0..d {
                for j in 0..d {
                    let re_z = i as f64 / d as f64;
                    let re_w = j as f64 / d as f64;
                    out.push([Complex64::new(re_z, iz), Complex64::new(re_w, iw)]);
                }
            }
        }
        out
    }
}

pub const D_RHO_MAX_REACH: i64 = 256;

/// Band-norm distance modulo integer translations,
/// `inf_{(p,q) ∈ ℤ²} ‖â − b̂ + (p,q)‖_ρ`, evaluated on the boundary grid.
///
/// For any shift `s`, the grid supremum of `|D + s|` is at least
/// `|mean(Re D) + s|`, so once a candidate value `best` is known only shifts
/// within distance `best` of `−mean(Re D)` can improve it. Those shifts are
/// enumerated up to [`D_RHO_MAX_REACH`] from the centre, so the result is
/// the exact grid infimum whenever it is below that reach, and an upper
/// bound otherwise.
pub fn d_rho(a: &MapExpr, b: &MapExpr, query: &BandNormQuery) -> f64 {
    let samples = query.boundary_samples();
    let diffs = par::map_collect(&samples, |z| {
        let ga = a.periodic_part_complex(*z);
        let gb = b.periodic_part_complex(*z);
        [ga[0] - gb[0], ga[1] - gb[1]]
    });
    let count = diffs.len() as f64;
    let mean = Point::new(
        diffs.iter().map(|d| d[0].re).sum::<f64>() / count,
        diffs.iter().map(|d| d[1].re).sum::<f64>() / count,
    );
    let shifted_sup = |p: i64, q: i64| -> f64 {
        let s = [p as f64, q as f64];
        diffs
            .iter()
            .map(|d| ((d[0] + s[0]).norm_sqr() + (d[1] + s[1]).norm_sqr()).sqrt())
            .fold(0.0, f64::max)
    };

    let centre = (-mean.x, -mean.y);
    let (cp, cq) = (centre.0.round() as i64, centre.1.round() as i64);
    let mut best = f64::INFINITY;
    for p in cp - 2..=cp + 2 {
        for q in cq - 2..=cq + 2 {
            best = best.min(shifted_sup(p, q));
        }
    }
    // Shifts outside the ±2 box can only win if they lie within `best` of the centre.
    let reach = (best.ceil() as i64 + 1).min(D_RHO_MAX_REACH);
    for p in cp - reach..=cp + reach {
        for q in cq - reach..=cq + reach {
            if (p - cp).abs() <= 2 && (q - cq).abs() <= 2 {
                continue;
            }
            let lower = Point::new(p as f64 - centre.0, q as f64 - centre.1).norm();
            if lower <= best {
                best = best.min(shifted_sup(p, q));
            }
        }
    }
    best
}
