//! Certified geometric predicates on finite samples of plane sets.
//!
//! Sets are carried as [`PointCloud`]s whose points lie on the set, together
//! with a geometric tolerance bounding how far the set can stray from the
//! cloud. Density checks are three-valued: a verdict is only certified when
//! the witness grid and the tolerance leave no room for doubt.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::torus_maps::{MapError, MapExpr, Point};

/// Default cap on the number of vertices produced by curve refinement.
pub const DEFAULT_MAX_POINTS: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("refinement needs {required} points, limit is {limit}")]
    ResourceLimit { required: u64, limit: u64 },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "ball needs a finite centre and positive radius, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.distance(self.center) <= self.radius
    }

    pub fn translated(&self, v: Point) -> Ball {
        Ball {
            center: self.center + v,
            radius: self.radius,
        }
    }
}

/// Finite sample of a plane set. `tolerance` bounds the distance from any
/// point of the represented set to the cloud; use `f64::INFINITY` for sparse
/// samples that can only ever witness density, never refute it.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    tolerance: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            tolerance: 0.0,
        }
    }

    pub fn with_tolerance(points: Vec<Point>, tolerance: f64) -> Self {
        PointCloud { points, tolerance }
    }

    pub fn empty() -> Self {
        PointCloud::new(Vec::new())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(min, max)` corners, or `None` for an empty cloud.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }

    pub fn index(&self, cell_size: f64) -> CloudIndex<'_> {
        CloudIndex::new(&self.points, cell_size)
    }
}

/// Uniform hash grid over a cloud. Nearest-distance queries are exact: they
/// return the same value as a brute-force scan.
#[derive(Debug)]
pub struct CloudIndex<'a> {
    points: &'a [Point],
    cell: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    lo: (i64, i64),
    hi: (i64, i64),
}

impl<'a> CloudIndex<'a> {
    pub fn new(points: &'a [Point], cell_size: f64) -> Self {
        assert!(
            cell_size > 0.0 && cell_size.is_finite(),
            "cell size must be positive"
        );
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let key = cell_of(*p, cell_size);
            lo = (lo.0.min(key.0), lo.1.min(key.1));
            hi = (hi.0.max(key.0), hi.1.max(key.1));
            cells.entry(key).or_default().push(i as u32);
        }
        CloudIndex {
            points,
            cell: cell_size,
            cells,
            lo,
            hi,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn scan_cell(&self, key: (i64, i64), z: Point, best: &mut f64) {
        if let Some(ids) = self.cells.get(&key) {
            for &i in ids {
                let d = z.distance(self.points[i as usize]);
                if d < *best {
                    *best = d;
                }
            }
        }
    }

    /// Exact nearest distance; `+∞` for an empty cloud.
    pub fn nearest_distance(&self, z: Point) -> f64 {
        self.nearest_capped(z, f64::INFINITY)
    }

    /// Whether some cloud point lies within `radius` of `z`.
    pub fn has_point_within(&self, z: Point, radius: f64) -> bool {
        self.nearest_capped(z, radius) <= radius
    }

    /// Exact nearest distance when it is at most `cap`; otherwise some value
    /// above `cap`.
    fn nearest_capped(&self, z: Point, cap: f64) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let (cx, cy) = cell_of(z, self.cell);
        let (lo, hi) = (self.lo, self.hi);
        let gap = |c: i64, l: i64, h: i64| (l - c).max(c - h).max(0);
        let first_ring = gap(cx, lo.0, hi.0).max(gap(cy, lo.1, hi.1));
        let max_ring = [cx - lo.0, hi.0 - cx, cy - lo.1, hi.1 - cy]
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in first_ring..=max_ring {
            // Ring r, clipped to the occupied cell range.
            let (x0, x1) = ((cx - r).max(lo.0), (cx + r).min(hi.0));
            let (y0, y1) = ((cy - r + 1).max(lo.1), (cy + r - 1).min(hi.1));
            for y in [cy - r, cy + r] {
                if (lo.1..=hi.1).contains(&y) {
                    for x in x0..=x1 {
                        self.scan_cell((x, y), z, &mut best);
                    }
                }
                if r == 0 {
                    break;
                }
            }
            for x in [cx - r, cx + r] {
                if r > 0 && (lo.0..=hi.0).contains(&x) {
                    for y in y0..=y1 {
                        self.scan_cell((x, y), z, &mut best);
                    }
                }
            }
            // Cells outside rings 0..=r are at least r cells away from z.
            let reached = r as f64 * self.cell;
            if r >= 1 && (best <= reached || cap < reached) {
                break;
            }
        }
        best
    }
}

fn cell_of(p: Point, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

/// Exact nearest Euclidean distance from `z` to the cloud (brute force).
pub fn nearest_distance(cloud: &PointCloud, z: Point) -> Result<f64, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(cloud
        .points
        .iter()
        .map(|p| z.distance(*p))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedDense,
    CertifiedNotDense,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedDense => "certified-dense",
            Verdict::CertifiedNotDense => "certified-not-dense",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of an ε-density check against a witness grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityVerdict {
    pub verdict: Verdict,
    /// Largest distance from a covering grid node to the cloud.
    pub max_gap: f64,
    pub grid_spacing: f64,
    pub eps: f64,
    pub nodes: usize,
}

impl DensityVerdict {
    pub fn is_dense(&self) -> bool {
        self.verdict == Verdict::CertifiedDense
    }
}

/// Witness nodes for a region. `cover` nodes are within half a grid diagonal
/// of every point of the region; `inside` marks nodes lying in the region
/// itself, the only ones allowed to refute density.
#[derive(Clone, Debug)]
pub struct WitnessGrid {
    offsets: Vec<(Point, bool)>,
    spacing: f64,
}

impl WitnessGrid {
    /// Square lattice of the given spacing around a ball of `radius`, keeping
    /// nodes within `radius + spacing·√2/2` of the centre.
    pub fn for_ball(radius: f64, spacing: f64) -> Self {
        let half_diag = spacing * SQRT_2 / 2.0;
        let reach = radius + half_diag;
        let steps = (reach / spacing).ceil() as i64;
        let mut offsets = Vec::new();
        for i in -steps..=steps {
            for j in -steps..=steps {
                let p = Point::new(i as f64 * spacing, j as f64 * spacing);
                let r = p.norm();
                if r <= reach {
                    offsets.push((p, r <= radius));
                }
            }
        }
        WitnessGrid { offsets, spacing }
    }

    /// Lattice on the closed square of half-side `half_side`; the spacing is
    /// shrunk so that nodes land on the square's edges.
    pub fn for_square(half_side: f64, spacing: f64) -> Self {
        let steps = ((2.0 * half_side / spacing).ceil() as i64).max(1);
        let actual = 2.0 * half_side / steps as f64;
        let mut offsets = Vec::with_capacity(((steps + 1) * (steps + 1)) as usize);
        for i in 0..=steps {
            for j in 0..=steps {
                let p = Point::new(
                    -half_side + i as f64 * actual,
                    -half_side + j as f64 * actual,
                );
                offsets.push((p, true));
            }
        }
        WitnessGrid {
            offsets,
            spacing: actual,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn nodes(&self, center: Point) -> impl Iterator<Item = Point> + '_ {
        self.offsets.iter().map(move |(o, _)| center + *o)
    }

    /// Full three-valued evaluation at `center`.
    pub fn evaluate(
        &self,
        index: &CloudIndex<'_>,
        center: Point,
        eps: f64,
        tolerance: f64,
    ) -> DensityVerdict {
        let distances = par::map_collect(&self.offsets, |(o, inside)| {
            (index.nearest_distance(center + *o), *inside)
        });
        let max_gap = par::max_f64(distances.iter().map(|d| d.0));
        let worst_inside = par::max_f64(distances.iter().filter(|d| d.1).map(|d| d.0));
        let verdict = if index.is_empty() {
            Verdict::CertifiedNotDense
        } else if max_gap + self.spacing * SQRT_2 / 2.0 <= eps {
            Verdict::CertifiedDense
        } else if worst_inside > eps + tolerance {
            Verdict::CertifiedNotDense
        } else {
            Verdict::Inconclusive
        };
        DensityVerdict {
            verdict,
            max_gap,
            grid_spacing: self.spacing,
            eps,
            nodes: self.offsets.len(),
        }
    }

    /// Serial check of the certified-dense condition with early exit; agrees
    /// with `evaluate(..).is_dense()`.
    pub fn certifies_dense(&self, index: &CloudIndex<'_>, center: Point, eps: f64) -> bool {
        let limit = eps - self.spacing * SQRT_2 / 2.0;
        !index.is_empty()
            && self
                .offsets
                .iter()
                .all(|(o, _)| index.has_point_within(center + *o, limit))
    }
}

fn check_spacing(eps: f64, spacing: f64) -> Result<(), GeometryError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(GeometryError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(spacing > 0.0 && spacing <= eps) {
        return Err(GeometryError::InvalidArgument(format!(
            "grid spacing must lie in (0, eps], got {spacing} with eps {eps}"
        )));
    }
    Ok(())
}

/// Certified ε-density of `cloud` in the closed ball.
///
/// Dense when every covering node is within `eps − spacing·√2/2` of the
/// cloud; not dense when a node inside the ball is farther than
/// `eps + cloud.tolerance()`; inconclusive otherwise.
pub fn eps_dense(
    cloud: &PointCloud,
    ball: &Ball,
    eps: f64,
    grid_spacing: f64,
) -> Result<DensityVerdict, GeometryError> {
    check_spacing(eps, grid_spacing)?;
    let grid = WitnessGrid::for_ball(ball.radius, grid_spacing);
    let index = cloud.index(eps);
    Ok(grid.evaluate(&index, ball.center, eps, cloud.tolerance))
}

/// Square variant of [`eps_dense`] over `center + [−h, h]²`.
pub fn eps_dense_square(
    cloud: &PointCloud,
    center: Point,
    half_side: f64,
    eps: f64,
    grid_spacing: f64,
) -> Result<DensityVerdict, GeometryError> {
    check_spacing(eps, grid_spacing)?;
    if half_side.is_nan() || half_side <= 0.0 {
        return Err(GeometryError::InvalidArgument(format!(
            "square half-side must be positive, got {half_side}"
        )));
    }
    let grid = WitnessGrid::for_square(half_side, grid_spacing);
    let index = cloud.index(eps);
    Ok(grid.evaluate(&index, center, eps, cloud.tolerance))
}

/// Vertices on the image of a segment under a map, with consecutive
/// vertices at most `tolerance` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub tolerance: f64,
}

impl Polyline {
    pub fn into_cloud(self) -> PointCloud {
        PointCloud::with_tolerance(self.points, self.tolerance)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Number of equal pieces the Lipschitz bisection rule splits `[a, b]` into.
pub fn subdivision_count(lipschitz: f64, length: f64, tol: f64) -> u64 {
    let mut pieces: u64 = 1;
    while length / pieces as f64 * lipschitz > tol {
        pieces = pieces.saturating_mul(2);
        if pieces == u64::MAX {
            break;
        }
    }
    pieces
}

/// Image of the segment `[a, b]` under `e`, bisected until every piece's
/// length times `e.lipschitz_bound()` is at most `tol`.
pub fn refine_segment_image(
    e: &MapExpr,
    a: Point,
    b: Point,
    tol: f64,
) -> Result<Polyline, GeometryError> {
    refine_segment_image_with_limit(e, a, b, tol, DEFAULT_MAX_POINTS)
}

pub fn refine_segment_image_with_limit(
    e: &MapExpr,
    a: Point,
    b: Point,
    tol: f64,
    max_points: u64,
) -> Result<Polyline, GeometryError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(GeometryError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(MapError::NonFinite {
            x: a.x + b.x,
            y: a.y + b.y,
        }
        .into());
    }
    let lipschitz = e.lipschitz_bound();
    let length = a.distance(b);
    let pieces = subdivision_count(lipschitz, length, tol);
    let required = pieces.saturating_add(1);
    if required > max_points {
        return Err(GeometryError::ResourceLimit {
            required,
            limit: max_points,
        });
    }
    let points = par::range_collect(required as usize, |i| {
        e.apply(a.lerp(b, i as f64 / pieces as f64))
    });
    if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
        return Err(MapError::NonFinite { x: bad.x, y: bad.y }.into());
    }
    Ok(Polyline {
        points,
        tolerance: length / pieces as f64 * lipschitz,
    })
}

/// Diameter of the projection of the cloud onto the unit direction `u`.
pub fn direction_width(cloud: &PointCloud, u: Point) -> Result<f64, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    check_unit(u)?;
    Ok(width_of(cloud.points(), u))
}

pub(crate) fn check_unit(u: Point) -> Result<(), GeometryError> {
    if (u.norm() - 1.0).abs() > 1e-12 {
        return Err(GeometryError::InvalidArgument(format!(
            "direction ({}, {}) is not a unit vector",
            u.x, u.y
        )));
    }
    Ok(())
}

pub(crate) fn width_of(points: &[Point], u: Point) -> f64 {
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let s = p.dot(u);
            (lo.min(s), hi.max(s))
        });
    hi - lo
}

/// Two headerless columns, 17 significant digits.
pub fn points_to_csv(points: &[Point]) -> String {
    let mut out = String::with_capacity(points.len() * 48);
    for p in points {
        let _ = writeln!(out, "{:.16e},{:.16e}", p.x, p.y);
    }
    out
}

pub fn points_from_csv(text: &str) -> Result<Vec<Point>, GeometryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut cols = line.split(',');
            let mut next = || -> Result<f64, GeometryError> {
                cols.next()
                    .ok_or_else(|| GeometryError::Csv {
                        line: i + 1,
                        message: "expected two columns".into(),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| GeometryError::Csv {
                        line: i + 1,
                        message: e.to_string(),
                    })
            };
            let x = next()?;
            let y = next()?;
            Ok(Point::new(x, y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(lo: f64, hi: f64, step: f64) -> Vec<Point> {
        let n = ((hi - lo) / step).round() as i64;
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push(Point::new(lo + i as f64 * step, lo + j as f64 * step));
            }
        }
        pts
    }

    #[test]
    fn covering_grid_is_dense() {
        let cloud = PointCloud::new(lattice(-2.5, 2.5, 0.5));
        let ball = Ball::new(Point::ORIGIN, 2.0).unwrap();
        let v = eps_dense(&cloud, &ball, 1.0, 0.25).unwrap();
        assert_eq!(v.verdict, Verdict::CertifiedDense);
        assert!(v.max_gap <= SQRT_2 / 4.0 + 1e-12);
        assert!(v.max_gap + v.grid_spacing * SQRT_2 / 2.0 <= 1.0);
    }

    #[test]
    fn empty_cloud_is_not_dense() {
        let ball = Ball::new(Point::ORIGIN, 1.0).unwrap();
        let v = eps_dense(&PointCloud::empty(), &ball, 0.5, 0.125).unwrap();
        assert_eq!(v.verdict, Verdict::CertifiedNotDense);
        let sparse = PointCloud::with_tolerance(Vec::new(), f64::INFINITY);
        assert_eq!(
            eps_dense(&sparse, &ball, 0.5, 0.125).unwrap().verdict,
            Verdict::CertifiedNotDense
        );
    }

    #[test]
    fn single_point_is_not_dense_in_large_ball() {
        let cloud = PointCloud::new(vec![Point::ORIGIN]);
        let ball = Ball::new(Point::ORIGIN, 2.0).unwrap();
        let v = eps_dense(&cloud, &ball, 1.0, 0.25).unwrap();
        assert_eq!(v.verdict, Verdict::CertifiedNotDense);
    }

    #[test]
    fn tolerance_can_make_verdict_inconclusive() {
        let cloud = PointCloud::with_tolerance(vec![Point::ORIGIN], 5.0);
        let ball = Ball::new(Point::ORIGIN, 2.0).unwrap();
        assert_eq!(
            eps_dense(&cloud, &ball, 1.0, 0.25).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn spacing_must_not_exceed_eps() {
        let ball = Ball::new(Point::ORIGIN, 1.0).unwrap();
        assert!(eps_dense(&PointCloud::empty(), &ball, 0.5, 0.6).is_err());
        assert!(Ball::new(Point::ORIGIN, 0.0).is_err());
    }

    #[test]
    fn square_grid_lands_on_edges() {
        let g = WitnessGrid::for_square(1.0, 0.3);
        assert!(g.spacing() <= 0.3);
        let nodes: Vec<_> = g.nodes(Point::ORIGIN).collect();
        assert!(nodes
            .iter()
            .any(|p| (p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12));
        assert!(nodes
            .iter()
            .all(|p| p.x.abs() <= 1.0 + 1e-12 && p.y.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn identity_refinement_respects_tolerance() {
        let id = MapExpr::identity();
        let line = refine_segment_image(&id, Point::ORIGIN, Point::new(1.0, 0.0), 0.3).unwrap();
        assert!(line.len() >= 4);
        for w in line.points.windows(2) {
            assert!(w[0].distance(w[1]) <= 0.3 + 1e-15);
        }
    }

    #[test]
    fn translated_refinement_is_shifted_subdivision() {
        let v = Point::new(0.7, -2.0);
        let t = MapExpr::Translate(v);
        let a = Point::new(0.0, 0.0);
        let b = Point::new(0.0, 1.0);
        let moved = refine_segment_image(&t, a, b, 0.1).unwrap();
        let plain = refine_segment_image(&MapExpr::identity(), a, b, 0.1).unwrap();
        assert_eq!(moved.len(), plain.len());
        for (p, q) in moved.points.iter().zip(&plain.points) {
            assert!(p.distance(*q + v) < 1e-15);
        }
    }

    #[test]
    fn refinement_limit_reports_required_count() {
        let e = MapExpr::vshear(1000, 10);
        let err =
            refine_segment_image_with_limit(&e, Point::ORIGIN, Point::new(1.0, 0.0), 1e-3, 1000)
                .unwrap_err();
        match err {
            GeometryError::ResourceLimit { required, limit } => {
                assert_eq!(limit, 1000);
                assert!(required > 1000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn width_examples() {
        let cloud = PointCloud::new(vec![Point::ORIGIN, Point::new(3.0, 4.0)]);
        assert_eq!(direction_width(&cloud, Point::new(0.0, 1.0)).unwrap(), 4.0);
        assert_eq!(direction_width(&cloud, Point::new(1.0, 0.0)).unwrap(), 3.0);
        assert!(direction_width(&PointCloud::empty(), Point::new(1.0, 0.0)).is_err());
        assert!(direction_width(&cloud, Point::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn nearest_distance_examples() {
        let cloud = PointCloud::new(vec![Point::ORIGIN]);
        assert_eq!(nearest_distance(&cloud, Point::new(3.0, 4.0)).unwrap(), 5.0);
        let z = Point::new(0.25, -1.5);
        let cloud = PointCloud::new(vec![Point::new(9.0, 9.0), z]);
        assert_eq!(nearest_distance(&cloud, z).unwrap(), 0.0);
        assert_eq!(cloud.index(0.1).nearest_distance(z), 0.0);
        assert!(nearest_distance(&PointCloud::empty(), z).is_err());
    }

    #[test]
    fn index_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..1000)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let cloud = PointCloud::new(pts);
        for cell in [0.05, 0.3, 1.0, 7.0] {
            let index = cloud.index(cell);
            for _ in 0..300 {
                let z = Point::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
                assert_eq!(
                    index.nearest_distance(z),
                    nearest_distance(&cloud, z).unwrap()
                );
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = vec![
            Point::new(0.1, -1.0 / 3.0),
            Point::new(1e-300, 12345.678901234567),
        ];
        let text = points_to_csv(&pts);
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains("x"));
        assert_eq!(points_from_csv(&text).unwrap(), pts);
        assert!(points_from_csv("1.0\n").is_err());
    }
}
