//! The shear conjugacy `ĥ = v̂ ∘ û` and the certified weak-spreading pipeline.
//!
//! For parameters `(n, q, m, α)` the conjugated rotation
//! `f̂ = ĥ ∘ R̂_(α,0) ∘ ĥ⁻¹` sends every ball of radius `1/n` onto a set that
//! is `1/n`-dense in some ball of radius `n`. The pieces are:
//!
//! * `δ = 2n/(πqm)` and the segments `I_δ = [−δ, δ] × {0}`,
//!   `J_δ = [1/(4q) − δ/2, 1/(4q) + δ/2] × {0}`;
//! * the box bounds `b = 8n²/m`, `a = δ + 2n(πqb)²` for the image of `I_δ`;
//! * a landing pair `(k, r)` with `J_δ + (r, 0) ⊂ R̂ᵏ(I_δ)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    eps_dense, eps_dense_square, refine_segment_image, Ball, GeometryError, PointCloud, Verdict,
    WitnessGrid,
};
use crate::par;
use crate::torus_maps::{MapError, MapExpr, Point};
use crate::DensityVerdict;

/// Precision below which `α` is treated as a rational number.
pub const RATIONAL_TOLERANCE: f64 = 1e-12;
/// Largest denominator considered when looking for a rational explanation of `α`.
pub const RATIONAL_MAX_DENOMINATOR: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("n, q and m must be positive (got n={n}, q={q}, m={m})")]
    NonPositive { n: u32, q: u32, m: u64 },
    #[error("q={q} must be a multiple of n={n} with q >= 2n")]
    Frequency { n: u32, q: u32 },
    #[error("alpha={alpha} is not finite")]
    NonFiniteAlpha { alpha: f64 },
    #[error("alpha={alpha} is rational within {tolerance:e}: {p}/{q}")]
    RationalAlpha {
        alpha: f64,
        p: i64,
        q: u64,
        tolerance: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("no landing with k <= {k_max}; best residual {best_residual:e} at k={best_k}")]
    SearchExhausted {
        k_max: u64,
        best_k: u64,
        best_residual: f64,
    },
    #[error("tolerance {tol} must lie in (0, {limit})")]
    InvalidTolerance { tol: f64, limit: f64 },
    #[error("parameters are not certified: {0}")]
    Uncertified(String),
    #[error("source ball radius {radius} must equal 1/n = {expected}")]
    SourceRadius { radius: f64, expected: f64 },
}

/// A smallness requirement on `m` that failed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "kebab-case")]
pub enum Violation {
    /// `δ/2 < 1/q` fails.
    HalfWidth { half_delta: f64, limit: f64 },
    /// `√(a² + b²) ≤ 1/(2n)` fails.
    BoxRadius { radius: f64, limit: f64 },
}

/// How `α` is screened for rationality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RationalityCheck {
    pub tolerance: f64,
    pub max_denominator: u64,
    /// Accept a rational-looking `α`, recording the detected fraction.
    pub allow_rational: bool,
}

impl Default for RationalityCheck {
    fn default() -> Self {
        RationalityCheck {
            tolerance: RATIONAL_TOLERANCE,
            max_denominator: RATIONAL_MAX_DENOMINATOR,
            allow_rational: false,
        }
    }
}

/// Validated construction parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadParams {
    pub n: u32,
    pub q: u32,
    pub m: u64,
    pub alpha: f64,
    /// All smallness requirements on `m` hold.
    pub certified: bool,
    pub violations: Vec<Violation>,
    /// Fraction `p/q` matching `α` when a rational `α` was force-accepted.
    pub rational_alpha: Option<(i64, u64)>,
    /// The requested frequency when it was replaced by `2qn`.
    pub substituted_q: Option<u32>,
}

/// The `(n, q, m, α)` block written into certificates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub n: u32,
    pub q: u32,
    pub m: u64,
    pub alpha: f64,
}

pub fn delta(n: u32, q: u32, m: u64) -> f64 {
    2.0 * n as f64 / (PI * q as f64 * m as f64)
}

/// `(a, b)` with `ĥ(I_δ) ⊂ [n − a, n + a] × [m − b, m + b]`.
pub fn box_bounds(n: u32, q: u32, m: u64) -> (f64, f64) {
    let b = 8.0 * (n as f64).powi(2) / m as f64;
    let a = delta(n, q, m) + 2.0 * n as f64 * (PI * q as f64 * b).powi(2);
    (a, b)
}

fn smallness_violations(n: u32, q: u32, m: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    let half_delta = delta(n, q, m) / 2.0;
    let half_limit = 1.0 / q as f64;
    if half_delta >= half_limit {
        out.push(Violation::HalfWidth {
            half_delta,
            limit: half_limit,
        });
    }
    let (a, b) = box_bounds(n, q, m);
    let radius = a.hypot(b);
    let limit = 1.0 / (2.0 * n as f64);
    if radius > limit {
        out.push(Violation::BoxRadius { radius, limit });
    }
    out
}

/// Continued-fraction search for `p/q` with `|α − p/q| ≤ tolerance` and
/// `q ≤ max_denominator`.
pub fn rational_approximation(
    alpha: f64,
    tolerance: f64,
    max_denominator: u64,
) -> Option<(i64, u64)> {
    if !alpha.is_finite() {
        return None;
    }
    let a0 = alpha.floor();
    let (mut p_prev, mut p) = (1i128, a0 as i128);
    let (mut q_prev, mut q) = (0i128, 1i128);
    let mut x = alpha;
    loop {
        if (alpha - p as f64 / q as f64).abs() <= tolerance {
            return Some((p as i64, q as u64));
        }
        let frac = x - x.floor();
        if frac == 0.0 {
            return Some((p as i64, q as u64));
        }
        x = 1.0 / frac;
        let a = x.floor();
        if a > max_denominator as f64 {
            return None;
        }
        let a = a as i128;
        let (p_next, q_next) = (a * p + p_prev, a * q + q_prev);
        if q_next > max_denominator as i128 {
            return None;
        }
        (p_prev, p, q_prev, q) = (p, p_next, q, q_next);
    }
}

/// `(q', substituted)`: `q` itself when it is a multiple of `n` with
/// `q ≥ 2n`, otherwise `2qn`.
pub fn resolve_frequency(n: u32, q: u32) -> (u32, bool) {
    if n > 0 && q.is_multiple_of(n) && q >= 2 * n {
        (q, false)
    } else {
        (2 * q * n, true)
    }
}

/// Smallest `m` with `δ/2 < 1/q` and `√(a² + b²) ≤ 1/(2n)`.
pub fn choose_m(n: u32, q: u32) -> u64 {
    assert!(n > 0 && q > 0, "n and q must be positive");
    (1u64..)
        .find(|&m| smallness_violations(n, q, m).is_empty())
        .expect("a and b tend to zero as m grows")
}

pub fn validate_params(n: u32, q: u32, m: u64, alpha: f64) -> Result<SpreadParams, ParamError> {
    validate_params_with(n, q, m, alpha, &RationalityCheck::default())
}

pub fn validate_params_with(
    n: u32,
    q: u32,
    m: u64,
    alpha: f64,
    check: &RationalityCheck,
) -> Result<SpreadParams, ParamError> {
    if n == 0 || q == 0 || m == 0 {
        return Err(ParamError::NonPositive { n, q, m });
    }
    if !q.is_multiple_of(n) || q < 2 * n {
        return Err(ParamError::Frequency { n, q });
    }
    if !alpha.is_finite() {
        return Err(ParamError::NonFiniteAlpha { alpha });
    }
    let rational = rational_approximation(alpha, check.tolerance, check.max_denominator);
    if let (Some((p, den)), false) = (rational, check.allow_rational) {
        return Err(ParamError::RationalAlpha {
            alpha,
            p,
            q: den,
            tolerance: check.tolerance,
        });
    }
    let violations = smallness_violations(n, q, m);
    Ok(SpreadParams {
        n,
        q,
        m,
        alpha,
        certified: violations.is_empty(),
        violations,
        rational_alpha: rational,
        substituted_q: None,
    })
}

impl SpreadParams {
    /// Validation with the frequency substitution `q ← 2qn` applied when
    /// needed and `m = None` resolved by [`choose_m`].
    pub fn resolve(
        n: u32,
        q: u32,
        m: Option<u64>,
        alpha: f64,
        check: &RationalityCheck,
    ) -> Result<SpreadParams, ParamError> {
        if n == 0 || q == 0 {
            return Err(ParamError::NonPositive {
                n,
                q,
                m: m.unwrap_or(1),
            });
        }
        let (q_eff, substituted) = resolve_frequency(n, q);
        let m = m.unwrap_or_else(|| choose_m(n, q_eff));
        let mut params = validate_params_with(n, q_eff, m, alpha, check)?;
        params.substituted_q = substituted.then_some(q);
        Ok(params)
    }

    pub fn delta(&self) -> f64 {
        delta(self.n, self.q, self.m)
    }

    pub fn box_bounds(&self) -> (f64, f64) {
        box_bounds(self.n, self.q, self.m)
    }

    pub fn record(&self) -> ParamsRecord {
        ParamsRecord {
            n: self.n,
            q: self.q,
            m: self.m,
            alpha: self.alpha,
        }
    }

    /// Density scale `1/n`.
    pub fn scale(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// The conjugated rotation `ĥ ∘ R̂_(α,0) ∘ ĥ⁻¹`.
    pub fn conjugated_rotation(&self) -> MapExpr {
        MapExpr::conjugate(build_h(self), MapExpr::translate(self.alpha, 0.0))
    }
}

/// `ĥ = v̂ ∘ û` with `û` the vertical shear of amplitude `m` and `v̂` the
/// horizontal shear of amplitude `n`, both of frequency `q`.
pub fn build_h(params: &SpreadParams) -> MapExpr {
    MapExpr::compose(
        MapExpr::hshear(params.n as i64, params.q),
        MapExpr::vshear(params.m as i64, params.q),
    )
}

/// Horizontal segment `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn horizontal(center: Point, half_width: f64) -> Self {
        Segment {
            a: center - Point::new(half_width, 0.0),
            b: center + Point::new(half_width, 0.0),
        }
    }

    pub fn center(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn translated(&self, v: Point) -> Segment {
        Segment {
            a: self.a + v,
            b: self.b + v,
        }
    }

    /// Whether `other` lies on the same line inside `self` (with slack).
    pub fn contains_segment(&self, other: &Segment, slack: f64) -> bool {
        let (lo, hi) = (self.a.x.min(self.b.x), self.a.x.max(self.b.x));
        let (olo, ohi) = (other.a.x.min(other.b.x), other.a.x.max(other.b.x));
        (self.a.y - other.a.y).abs() <= slack && olo >= lo - slack && ohi <= hi + slack
    }
}

/// `(I_δ, J_δ)`.
pub fn segments(params: &SpreadParams) -> (Segment, Segment) {
    let d = params.delta();
    let i = Segment::horizontal(Point::ORIGIN, d);
    let j = Segment::horizontal(Point::new(0.25 / params.q as f64, 0.0), d / 2.0);
    (i, j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Containment {
    CertifiedContained,
    CertifiedNotContained,
    Inconclusive,
}

/// Containment of a refined curve image in a ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentCheck {
    pub verdict: Containment,
    pub ball: Ball,
    /// Farthest vertex from the ball's centre.
    pub max_distance: f64,
    /// Achieved curve tolerance (consecutive-vertex bound).
    pub curve_tolerance: f64,
    pub vertices: usize,
}

/// Outcome of [`claim1_verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim1Certificate {
    pub kind: String,
    pub params: ParamsRecord,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub box_radius: f64,
    pub analytic_box_ok: bool,
    pub i_segment_verdict: ContainmentCheck,
    /// `ĥ(J_δ)` against `[−n, n]²` at `ε = 1/n`.
    pub j_segment_density: DensityVerdict,
    /// The same square at the sharper `ε = 2/q`.
    pub j_segment_density_sharp: DensityVerdict,
    pub tol: f64,
    pub substituted_q: Option<u32>,
}

/// Three-way outcome used for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Positive,
    Negative,
    Inconclusive,
}

impl Claim1Certificate {
    pub fn outcome(&self) -> Outcome {
        let contained = self.i_segment_verdict.verdict;
        let dense = self.j_segment_density.verdict;
        if !self.analytic_box_ok
            || contained == Containment::CertifiedNotContained
            || dense == Verdict::CertifiedNotDense
        {
            Outcome::Negative
        } else if contained == Containment::CertifiedContained && dense == Verdict::CertifiedDense {
            Outcome::Positive
        } else {
            Outcome::Inconclusive
        }
    }
}

/// Checks both halves of the segment claim: the analytic box bound, the
/// refined image of `I_δ` inside `B((n, m), 1/(2n))`, and `1/n`-density of the
/// refined image of `J_δ` in `[−n, n]²`.
pub fn claim1_verify(
    params: &SpreadParams,
    tol: f64,
) -> Result<Claim1Certificate, ConstructionError> {
    let radius = 1.0 / (2.0 * params.n as f64);
    if !(tol > 0.0 && tol < radius) {
        return Err(ConstructionError::InvalidTolerance { tol, limit: radius });
    }
    let h = build_h(params);
    let (i_seg, j_seg) = segments(params);
    let (a, b) = params.box_bounds();
    let box_radius = a.hypot(b);

    let center = Point::new(params.n as f64, params.m as f64);
    let i_image = refine_segment_image(&h, i_seg.a, i_seg.b, tol)?;
    let max_distance = par::max_f64(i_image.points.iter().map(|p| p.distance(center)));
    let contained = if max_distance <= radius - i_image.tolerance {
        Containment::CertifiedContained
    } else if max_distance > radius {
        Containment::CertifiedNotContained
    } else {
        Containment::Inconclusive
    };
    let i_check = ContainmentCheck {
        verdict: contained,
        ball: Ball { center, radius },
        max_distance,
        curve_tolerance: i_image.tolerance,
        vertices: i_image.len(),
    };

    let j_cloud = refine_segment_image(&h, j_seg.a, j_seg.b, tol)?.into_cloud();
    let half_side = params.n as f64;
    let eps = params.scale();
    let dense = eps_dense_square(&j_cloud, Point::ORIGIN, half_side, eps, eps / 4.0)?;
    let sharp_eps = 2.0 / params.q as f64;
    let sharp = eps_dense_square(
        &j_cloud,
        Point::ORIGIN,
        half_side,
        sharp_eps,
        sharp_eps / 4.0,
    )?;

    Ok(Claim1Certificate {
        kind: "claim1".into(),
        params: params.record(),
        delta: params.delta(),
        a,
        b,
        box_radius,
        analytic_box_ok: box_radius <= radius,
        i_segment_verdict: i_check,
        j_segment_density: dense,
        j_segment_density_sharp: sharp,
        tol,
        substituted_q: params.substituted_q,
    })
}

/// `kα − r` lands within `δ/2` of `1/(4q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandingPair {
    pub k: u64,
    pub r: i64,
    pub residual: f64,
}

/// Distance of `kα − r` from `1/(4q)` for the best integer `r`.
pub fn landing_residual(alpha: f64, q: u32, k: u64) -> (i64, f64) {
    let offset = k as f64 * alpha - 0.25 / q as f64;
    let r = offset.round();
    (r as i64, (offset - r).abs())
}

/// `20·⌈2/δ⌉`.
pub fn default_k_max(delta: f64) -> u64 {
    20 * (2.0 / delta).ceil() as u64
}

/// Smallest `k ≤ k_max` with `|kα − r − 1/(4q)| ≤ δ/2` for some integer `r`,
/// so that `J_δ + (r, 0) ⊂ R̂ᵏ_(α,0)(I_δ)`.
pub fn find_k_r(
    alpha: f64,
    q: u32,
    delta: f64,
    k_max: u64,
) -> Result<LandingPair, ConstructionError> {
    let mut best = (0u64, f64::INFINITY);
    for k in 1..=k_max {
        let (r, residual) = landing_residual(alpha, q, k);
        if residual <= delta / 2.0 {
            return Ok(LandingPair { k, r, residual });
        }
        if residual < best.1 {
            best = (k, residual);
        }
    }
    Err(ConstructionError::SearchExhausted {
        k_max,
        best_k: best.0,
        best_residual: best.1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Follow the conjugacy argument: landing pair, predicted ball, and a
    /// refined image of the transported segment.
    Pipeline,
    /// Seed the whole source ball as a point cloud and iterate it.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// `None` uses `20·⌈2/δ⌉` in pipeline mode and 64 in direct mode.
    pub k_max: Option<u64>,
    /// Curve tolerance for the refined image.
    pub tol: f64,
    /// Witness grid spacing; `None` means `ε/4`.
    pub grid_spacing: Option<f64>,
    pub mode: SearchMode,
    /// Approximate number of source points in direct mode.
    pub direct_points: usize,
    /// Cap on candidate centres tried by the fallback scan.
    pub fallback_limit: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            k_max: None,
            tol: 1e-2,
            grid_spacing: None,
            mode: SearchMode::Pipeline,
            direct_points: 10_000,
            fallback_limit: 100_000,
        }
    }
}

pub const DIRECT_DEFAULT_K_MAX: u64 = 64;

/// Discrepancy between the conjugacy fast path and naive iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateCrossCheck {
    pub samples: usize,
    pub k: u64,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub agree: bool,
}

/// Serialized outcome of [`spreading_search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCertificate {
    pub kind: String,
    pub mode: SearchMode,
    pub params: ParamsRecord,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub k: u64,
    pub r: Option<i64>,
    pub source_ball: Ball,
    pub target_ball: Ball,
    pub eps: f64,
    pub verdict: Verdict,
    pub max_gap: f64,
    pub grid_spacing: f64,
    pub predicted: bool,
    pub substituted_q: Option<u32>,
    pub rational_alpha: Option<(i64, u64)>,
    pub tol: f64,
    pub k_max: u64,
    pub cloud_points: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cross_check: Option<IterateCrossCheck>,
}

impl DensityCertificate {
    pub fn outcome(&self) -> Outcome {
        match self.verdict {
            Verdict::CertifiedDense => Outcome::Positive,
            Verdict::CertifiedNotDense => Outcome::Negative,
            Verdict::Inconclusive => Outcome::Inconclusive,
        }
    }
}

/// Point `(i/q, j/q)` nearest to `z`.
pub fn nearest_lattice_point(z: Point, q: u32) -> Point {
    let qf = q as f64;
    Point::new((z.x * qf).round() / qf, (z.y * qf).round() / qf)
}

/// Finds an iterate `k` for which `f̂ᵏ(source_ball)` is certified
/// `1/n`-dense in a ball of radius `n`.
pub fn spreading_search(
    params: &SpreadParams,
    source_ball: &Ball,
    options: &SearchOptions,
) -> Result<DensityCertificate, ConstructionError> {
    if !params.certified {
        return Err(ConstructionError::Uncertified(format!(
            "{:?}",
            params.violations
        )));
    }
    let expected = params.scale();
    if (source_ball.radius - expected).abs() > 1e-12 * expected {
        return Err(ConstructionError::SourceRadius {
            radius: source_ball.radius,
            expected,
        });
    }
    match options.mode {
        SearchMode::Pipeline => pipeline_search(params, source_ball, options),
        SearchMode::Direct => direct_search(params, source_ball, options),
    }
}

struct Frame<'a> {
    params: &'a SpreadParams,
    source_ball: Ball,
    eps: f64,
    spacing: f64,
    k_max: u64,
    tol: f64,
}

impl Frame<'_> {
    #[allow(clippy::too_many_arguments)]
    fn certificate(
        &self,
        mode: SearchMode,
        k: u64,
        r: Option<i64>,
        target_ball: Ball,
        verdict: DensityVerdict,
        predicted: bool,
        cloud_points: usize,
        cross_check: Option<IterateCrossCheck>,
    ) -> DensityCertificate {
        let (a, b) = self.params.box_bounds();
        DensityCertificate {
            kind: "spread".into(),
            mode,
            params: self.params.record(),
            delta: self.params.delta(),
            a,
            b,
            k,
            r,
            source_ball: self.source_ball,
            target_ball,
            eps: self.eps,
            verdict: verdict.verdict,
            max_gap: verdict.max_gap,
            grid_spacing: verdict.grid_spacing,
            predicted,
            substituted_q: self.params.substituted_q,
            rational_alpha: self.params.rational_alpha,
            tol: self.tol,
            k_max: self.k_max,
            cloud_points,
            cross_check,
        }
    }
}

fn pipeline_search(
    params: &SpreadParams,
    source_ball: &Ball,
    options: &SearchOptions,
) -> Result<DensityCertificate, ConstructionError> {
    let n = params.n as f64;
    let eps = params.scale();
    let delta = params.delta();
    let frame = Frame {
        params,
        source_ball: *source_ball,
        eps,
        spacing: options.grid_spacing.unwrap_or(eps / 4.0),
        k_max: options.k_max.unwrap_or_else(|| default_k_max(delta)),
        tol: options.tol,
    };

    let landing = find_k_r(params.alpha, params.q, delta, frame.k_max)?;
    let lattice = nearest_lattice_point(source_ball.center, params.q);
    let target_center = lattice - Point::new(n - landing.r as f64, params.m as f64);
    let target = Ball::new(target_center, n)?;
    let cloud = pipeline_cloud(params, source_ball, landing.k, options.tol)?;

    let verdict = eps_dense(&cloud, &target, eps, frame.spacing)?;
    if verdict.is_dense() {
        return Ok(frame.certificate(
            SearchMode::Pipeline,
            landing.k,
            Some(landing.r),
            target,
            verdict,
            true,
            cloud.len(),
            None,
        ));
    }

    let grid = WitnessGrid::for_ball(n, frame.spacing);
    let index = cloud.index(eps);
    if let Some(center) = fallback_scan(
        &cloud,
        &grid,
        &index,
        params.q,
        target_center,
        eps,
        options.fallback_limit,
    ) {
        let ball = Ball::new(center, n)?;
        let v = grid.evaluate(&index, center, eps, cloud.tolerance());
        return Ok(frame.certificate(
            SearchMode::Pipeline,
            landing.k,
            Some(landing.r),
            ball,
            v,
            false,
            cloud.len(),
            None,
        ));
    }
    let mut v = verdict;
    v.verdict = Verdict::Inconclusive;
    Ok(frame.certificate(
        SearchMode::Pipeline,
        landing.k,
        Some(landing.r),
        target,
        v,
        true,
        cloud.len(),
        None,
    ))
}

/// `f̂ᵏ(ĥ(I))` where `I` is the copy of `I_δ` whose image sits inside the
/// source ball: the lattice translate `I_δ + ℓ − (n, m)`.
fn pipeline_cloud(
    params: &SpreadParams,
    source_ball: &Ball,
    k: u64,
    tol: f64,
) -> Result<PointCloud, ConstructionError> {
    let lattice = nearest_lattice_point(source_ball.center, params.q);
    let (i_seg, _) = segments(params);
    let source_segment = i_seg.translated(lattice - Point::new(params.n as f64, params.m as f64));
    let moved = source_segment.translated(Point::new(k as f64 * params.alpha, 0.0));
    let h = build_h(params);
    Ok(refine_segment_image(&h, moved.a, moved.b, tol)?.into_cloud())
}

/// Recomputes the image cloud a certificate was judged on.
pub fn event_cloud(
    params: &SpreadParams,
    cert: &DensityCertificate,
    options: &SearchOptions,
) -> Result<PointCloud, ConstructionError> {
    match cert.mode {
        SearchMode::Pipeline => pipeline_cloud(params, &cert.source_ball, cert.k, cert.tol),
        SearchMode::Direct => {
            let f = params.conjugated_rotation();
            let seeds = ball_samples(&cert.source_ball, options.direct_points);
            let images = par::map_collect(&seeds, |p| f.iterate(*p, cert.k));
            let images = images.into_iter().collect::<Result<Vec<_>, _>>()?;
            Ok(PointCloud::with_tolerance(images, f64::INFINITY))
        }
    }
}

/// Candidate centres on the `(1/q)`-lattice inside the cloud's bounding box,
/// nearest to `prefer` first.
fn fallback_scan(
    cloud: &PointCloud,
    grid: &WitnessGrid,
    index: &crate::geometry::CloudIndex<'_>,
    q: u32,
    prefer: Point,
    eps: f64,
    limit: usize,
) -> Option<Point> {
    let (lo, hi) = cloud.bounding_box()?;
    let qf = q as f64;
    let (i0, i1) = ((lo.x * qf).ceil() as i64, (hi.x * qf).floor() as i64);
    let (j0, j1) = ((lo.y * qf).ceil() as i64, (hi.y * qf).floor() as i64);
    let count = (i1 - i0 + 1).max(0) as u128 * (j1 - j0 + 1).max(0) as u128;
    if count == 0 || count > 16 * limit as u128 {
        return None;
    }
    let mut candidates: Vec<(i64, i64)> = (i0..=i1)
        .flat_map(|i| (j0..=j1).map(move |j| (i, j)))
        .collect();
    let to_point = |(i, j): (i64, i64)| Point::new(i as f64 / qf, j as f64 / qf);
    candidates.sort_by(|a, b| {
        let da = to_point(*a).distance(prefer);
        let db = to_point(*b).distance(prefer);
        da.total_cmp(&db).then(a.cmp(b))
    });
    candidates.truncate(limit);
    first_dense(
        &candidates.into_iter().map(to_point).collect::<Vec<_>>(),
        grid,
        index,
        eps,
    )
}

/// First centre (in slice order) where the grid certifies density.
fn first_dense(
    centers: &[Point],
    grid: &WitnessGrid,
    index: &crate::geometry::CloudIndex<'_>,
    eps: f64,
) -> Option<Point> {
    let hits = par::map_collect(centers, |c| grid.certifies_dense(index, *c, eps));
    hits.iter().position(|&h| h).map(|i| centers[i])
}

/// Square lattice of about `count` points inside the ball.
pub fn ball_samples(ball: &Ball, count: usize) -> Vec<Point> {
    let spacing = ball.radius * (PI / count.max(1) as f64).sqrt();
    let steps = (ball.radius / spacing).ceil() as i64;
    let mut out = Vec::new();
    for i in -steps..=steps {
        for j in -steps..=steps {
            let offset = Point::new(i as f64 * spacing, j as f64 * spacing);
            if offset.norm() <= ball.radius {
                out.push(ball.center + offset);
            }
        }
    }
    out
}

fn direct_search(
    params: &SpreadParams,
    source_ball: &Ball,
    options: &SearchOptions,
) -> Result<DensityCertificate, ConstructionError> {
    let n = params.n as f64;
    let eps = params.scale();
    let frame = Frame {
        params,
        source_ball: *source_ball,
        eps,
        spacing: options.grid_spacing.unwrap_or(eps / 4.0),
        k_max: options.k_max.unwrap_or(DIRECT_DEFAULT_K_MAX),
        tol: options.tol,
    };
    let f = params.conjugated_rotation();
    let seeds = ball_samples(source_ball, options.direct_points);
    let grid = WitnessGrid::for_ball(n, frame.spacing);
    let qf = params.q as f64;
    let mut last = None;

    for k in 1..=frame.k_max {
        let images = par::map_collect(&seeds, |p| f.iterate(*p, k));
        let images = images.into_iter().collect::<Result<Vec<_>, _>>()?;
        // A sparse sample of f̂ᵏ(B): it can witness density but never refute it.
        let cloud = PointCloud::with_tolerance(images, f64::INFINITY);
        let index = cloud.index(eps);
        let lattice: BTreeSet<(i64, i64)> = cloud
            .points()
            .iter()
            .map(|p| ((p.x * qf).round() as i64, (p.y * qf).round() as i64))
            .collect();
        let centers: Vec<Point> = lattice
            .into_iter()
            .map(|(i, j)| Point::new(i as f64 / qf, j as f64 / qf))
            .collect();
        if let Some(center) = first_dense(&centers, &grid, &index, eps) {
            let ball = Ball::new(center, n)?;
            let v = grid.evaluate(&index, center, eps, cloud.tolerance());
            let check = cross_check(&f, &seeds, k);
            return Ok(frame.certificate(
                SearchMode::Direct,
                k,
                None,
                ball,
                v,
                false,
                cloud.len(),
                Some(check),
            ));
        }
        last = Some(cloud.len());
    }
    let inconclusive = DensityVerdict {
        verdict: Verdict::Inconclusive,
        max_gap: f64::INFINITY,
        grid_spacing: grid.spacing(),
        eps,
        nodes: grid.len(),
    };
    Ok(frame.certificate(
        SearchMode::Direct,
        frame.k_max,
        None,
        Ball::new(source_ball.center, n)?,
        inconclusive,
        false,
        last.unwrap_or(0),
        None,
    ))
}

/// Compares fast-path and naive iterates on every 97th seed.
fn cross_check(f: &MapExpr, seeds: &[Point], k: u64) -> IterateCrossCheck {
    let sample: Vec<Point> = seeds.iter().step_by(97).copied().collect();
    let discrepancies = par::map_collect(&sample, |p| {
        match (f.iterate(*p, k), f.iterate_naive(*p, k)) {
            (Ok(a), Ok(b)) => a.distance(b),
            _ => f64::INFINITY,
        }
    });
    let max_discrepancy = par::max_f64(discrepancies);
    let tolerance = f.iterate_tolerance(k, 1e-12);
    IterateCrossCheck {
        samples: sample.len(),
        k,
        max_discrepancy,
        tolerance,
        agree: max_discrepancy <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt2m1() -> f64 {
        2f64.sqrt() - 1.0
    }

    #[test]
    fn reference_params_are_certified() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        assert!(p.certified, "{:?}", p.violations);
        let d = 1.0 / (120.0 * PI);
        assert!((p.delta() - d).abs() < 1e-15);
        assert!((p.delta() - 0.002653).abs() < 1e-6);
        assert!(p.delta() / 2.0 < 0.5);
    }

    #[test]
    fn frequency_constraint_rejects() {
        assert_eq!(
            validate_params(2, 3, 500, sqrt2m1()),
            Err(ParamError::Frequency { n: 2, q: 3 })
        );
        assert_eq!(
            validate_params(2, 5, 500, sqrt2m1()).unwrap_err(),
            ParamError::Frequency { n: 2, q: 5 }
        );
        assert!(validate_params(0, 2, 1, sqrt2m1()).is_err());
    }

    #[test]
    fn small_m_is_not_certified() {
        let p = validate_params(1, 2, 1, sqrt2m1()).unwrap();
        assert!(!p.certified);
        let (_, b) = p.box_bounds();
        assert_eq!(b, 8.0);
        assert!(p
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BoxRadius { .. })));
    }

    #[test]
    fn rational_alpha_is_named() {
        match validate_params(1, 2, 120, 0.5) {
            Err(ParamError::RationalAlpha { p, q, .. }) => assert_eq!((p, q), (1, 2)),
            other => panic!("{other:?}"),
        }
        assert_eq!(rational_approximation(0.125, 1e-12, 10_000), Some((1, 8)));
        assert_eq!(
            rational_approximation(-2.0 / 7.0, 1e-12, 10_000),
            Some((-2, 7))
        );
        assert_eq!(rational_approximation(sqrt2m1(), 1e-12, 10_000), None);
        assert_eq!(
            rational_approximation(0.41421356237309515, 1e-12, 10_000),
            None
        );
        assert_eq!(rational_approximation(PI, 1e-12, 10_000), None);
        let forced = validate_params_with(
            1,
            2,
            120,
            0.125,
            &RationalityCheck {
                allow_rational: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(forced.rational_alpha, Some((1, 8)));
    }

    #[test]
    fn choose_m_reference_values() {
        // Oracle: direct evaluation of the closed forms during the scan.
        let radius = |m: f64| {
            let d = 1.0 / (PI * m);
            let b = 8.0 / m;
            let a = d + 2.0 * (2.0 * PI * b).powi(2);
            a.hypot(b)
        };
        assert!(radius(100.0) > 0.5 && (radius(100.0) - 0.515).abs() < 1e-3);
        assert!(radius(110.0) <= 0.5 && (radius(110.0) - 0.427).abs() < 1e-3);
        assert!(radius(101.0) > 0.5 && radius(102.0) <= 0.5);
        assert_eq!(choose_m(1, 2), 102);
        assert_eq!(choose_m(2, 4), 1612);
    }

    #[test]
    fn choose_m_is_minimal_and_certified() {
        for (n, q) in [(1, 2), (1, 4), (2, 4), (2, 8), (3, 6)] {
            let m = choose_m(n, q);
            assert!(validate_params(n, q, m, sqrt2m1()).unwrap().certified);
            assert!(!validate_params(n, q, m - 1, sqrt2m1()).unwrap().certified);
        }
    }

    #[test]
    fn frequency_substitution() {
        assert_eq!(resolve_frequency(2, 3), (12, true));
        assert_eq!(resolve_frequency(1, 2), (2, false));
        assert_eq!(resolve_frequency(2, 4), (4, false));
        let p = SpreadParams::resolve(2, 3, None, sqrt2m1(), &RationalityCheck::default()).unwrap();
        assert_eq!((p.q, p.substituted_q), (12, Some(3)));
        assert!(p.certified);
    }

    #[test]
    fn h_maps_origin_to_amplitudes() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        let z = build_h(&p).eval(Point::ORIGIN).unwrap();
        assert!(z.distance(Point::new(1.0, 120.0)) < 1e-12);
    }

    #[test]
    fn segment_shapes() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        let (i, j) = segments(&p);
        let d = 1.0 / (120.0 * PI);
        assert!((i.a.x + d).abs() < 1e-15 && (i.b.x - d).abs() < 1e-15);
        assert_eq!(i.a.y, 0.0);
        assert!((j.center().x - 0.125).abs() < 1e-15);
        assert!((j.length() - i.length() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn claim1_rejects_degenerate_tolerance() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        assert!(matches!(
            claim1_verify(&p, 0.5),
            Err(ConstructionError::InvalidTolerance { .. })
        ));
    }

    #[test]
    fn claim1_fails_for_tiny_m() {
        let p = validate_params(1, 2, 1, sqrt2m1()).unwrap();
        let cert = claim1_verify(&p, 1e-3).unwrap();
        assert!(!cert.analytic_box_ok);
        assert_eq!(cert.outcome(), Outcome::Negative);
    }

    #[test]
    fn exact_rational_landing() {
        let q = 2;
        let l = find_k_r(0.25 / q as f64, q, 1e-3, 10).unwrap();
        assert_eq!((l.k, l.r), (1, 0));
        assert_eq!(l.residual, 0.0);
    }

    #[test]
    fn landing_matches_brute_force_scan() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        let d = p.delta();
        let k_max = default_k_max(d);
        let l = find_k_r(p.alpha, p.q, d, k_max).unwrap();
        // Oracle: minimise |frac(kα) − 1/8| over the whole range and keep the
        // first k under δ/2.
        let first = (1..=k_max)
            .find(|&k| {
                let x = k as f64 * p.alpha;
                let frac = x - x.floor();
                let dist = (frac - 0.125)
                    .abs()
                    .min((frac - 1.125).abs())
                    .min((frac + 0.875).abs());
                dist <= d / 2.0
            })
            .unwrap();
        assert_eq!(l.k, first);
        assert!(l.residual <= d / 2.0);
        let replay = (l.k as f64 * p.alpha - l.r as f64 - 0.125).abs();
        assert_eq!(replay, l.residual);
    }

    #[test]
    fn landing_exhaustion_reports_best() {
        match find_k_r(sqrt2m1(), 2, 1e-9, 50) {
            Err(ConstructionError::SearchExhausted {
                k_max,
                best_k,
                best_residual,
            }) => {
                assert_eq!(k_max, 50);
                assert!((1..=50).contains(&best_k));
                assert!(best_residual > 5e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn landing_contains_j_segment() {
        let p = validate_params(1, 2, 120, sqrt2m1()).unwrap();
        let (i, j) = segments(&p);
        let l = find_k_r(p.alpha, p.q, p.delta(), default_k_max(p.delta())).unwrap();
        let moved = i.translated(Point::new(l.k as f64 * p.alpha, 0.0));
        assert!(moved.contains_segment(&j.translated(Point::new(l.r as f64, 0.0)), 1e-12));
    }

    #[test]
    fn lattice_choice_fits_in_source_ball() {
        for (c, q, n) in [
            ((0.3, 0.7), 2u32, 1u32),
            ((0.51, -3.2), 4, 2),
            ((0.5, 0.5), 2, 1),
        ] {
            let c = Point::new(c.0, c.1);
            let lp = nearest_lattice_point(c, q);
            assert!(lp.distance(c) + 0.5 / n as f64 <= 1.0 / n as f64);
        }
        assert_eq!(
            nearest_lattice_point(Point::new(1.5, -0.5), 2),
            Point::new(1.5, -0.5)
        );
    }

    #[test]
    fn spreading_rejects_wrong_radius_and_uncertified() {
        let p = validate_params(1, 2, 102, sqrt2m1()).unwrap();
        let ball = Ball::new(Point::new(0.3, 0.7), 0.5).unwrap();
        assert!(matches!(
            spreading_search(&p, &ball, &SearchOptions::default()),
            Err(ConstructionError::SourceRadius { .. })
        ));
        let bad = validate_params(1, 2, 3, sqrt2m1()).unwrap();
        let ball = Ball::new(Point::new(0.3, 0.7), 1.0).unwrap();
        assert!(matches!(
            spreading_search(&bad, &ball, &SearchOptions::default()),
            Err(ConstructionError::Uncertified(_))
        ));
    }

    #[test]
    fn ball_samples_stay_inside() {
        let ball = Ball::new(Point::new(0.3, 0.7), 1.0).unwrap();
        let pts = ball_samples(&ball, 10_000);
        assert!(pts.len() > 9_000 && pts.len() < 11_000, "{}", pts.len());
        assert!(pts.iter().all(|p| ball.contains(*p)));
    }

    #[test]
    fn cosine_inequalities_hold() {
        // Guard for the derivation of the box bounds.
        for i in 0..=100_000 {
            let x = -50.0 + 100.0 * i as f64 / 100_000.0;
            assert!(1.0 - x.cos() <= x * x / 2.0 + 1e-15);
            let t = (PI / 2.0) * i as f64 / 100_000.0;
            assert!(t.sin() >= t / 2.0);
        }
    }
}
