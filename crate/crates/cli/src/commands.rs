use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use torus_spread::construction::{Outcome, ParamsRecord, RationalityCheck};
use torus_spread::foliation::default_threshold;
use torus_spread::geometry::{points_to_csv, WitnessGrid};
use torus_spread::torus_maps::POINTWISE_NORM;
use torus_spread::{
    build_h, claim1_verify, d_rho, default_directions, eps_dense_square, event_cloud,
    refine_segment_image, rotation_number, segments, spreading_search, width_growth_certificate,
    Ball, BandNormQuery, CircleLift, ConstructionError, DensityVerdict, GeometryError, MapExpr,
    ParamError, Point, SearchMode, SearchOptions, Segment, SpreadParams,
};

use crate::config::RunConfig;
use crate::svg;
use crate::Failure;

/// Everything a command produced; `main` decides where it goes.
#[derive(Debug)]
pub struct Report {
    pub code: i32,
    pub summary: String,
    pub json: String,
    pub svg: Option<String>,
    pub csv: Option<String>,
}

pub const COMMANDS: &[&str] = &[
    "verify-claim1",
    "spread",
    "figure",
    "widths",
    "rotnum",
    "rho",
];

pub fn run(command: &str, cfg: &RunConfig) -> Result<Report, Failure> {
    cfg.get::<u64>("seed")?;
    let mut report = match command {
        "verify-claim1" => verify_claim1(cfg)?,
        "spread" => spread(cfg)?,
        "figure" => figure(cfg)?,
        "widths" => widths(cfg)?,
        "rotnum" => rotnum(cfg)?,
        "rho" => rho(cfg)?,
        other => return Err(Failure::usage(format!("unknown command {other:?}"))),
    };
    report.summary = format!("{command}: {}", report.summary);
    Ok(report)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    command: &'a str,
    inputs: BTreeMap<String, String>,
}

fn envelope<T: Serialize>(command: &str, body: &T, cfg: &RunConfig) -> Result<String, Failure> {
    let env = Envelope {
        body,
        command,
        inputs: cfg.used(),
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Failure::resource(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn outcome_code(o: Outcome) -> (i32, &'static str) {
    match o {
        Outcome::Positive => (0, "certified positive"),
        Outcome::Negative => (1, "certified negative"),
        Outcome::Inconclusive => (2, "inconclusive"),
    }
}

fn construction_failure(e: ConstructionError) -> Failure {
    match e {
        ConstructionError::Param(p) => param_failure(p),
        ConstructionError::Geometry(g) => geometry_failure(g),
        ConstructionError::InvalidTolerance { .. }
        | ConstructionError::Uncertified(_)
        | ConstructionError::SourceRadius { .. } => Failure::usage(e.to_string()),
        ConstructionError::SearchExhausted { .. } | ConstructionError::Map(_) => {
            Failure::resource(e.to_string())
        }
    }
}

fn geometry_failure(e: GeometryError) -> Failure {
    match e {
        GeometryError::InvalidArgument(_) | GeometryError::Csv { .. } => {
            Failure::usage(e.to_string())
        }
        _ => Failure::resource(e.to_string()),
    }
}

fn param_failure(e: ParamError) -> Failure {
    match e {
        ParamError::RationalAlpha { alpha, p, q, tolerance } => Failure::usage(format!(
            "alpha={alpha} is rational within {tolerance:e} (p/q = {p}/{q}); pass --allow-rational to accept it"
        )),
        other => Failure::usage(other.to_string()),
    }
}

fn alpha(cfg: &RunConfig) -> Result<f64, Failure> {
    cfg.get_or("alpha", 2f64.sqrt() - 1.0)
}

fn params(cfg: &RunConfig) -> Result<SpreadParams, Failure> {
    let n = cfg.require::<u32>("n")?;
    let q = cfg.require::<u32>("q")?;
    let m = cfg.m_or_auto()?;
    let alpha = alpha(cfg)?;
    let check = RationalityCheck {
        allow_rational: cfg.flag("allow-rational")?,
        ..RationalityCheck::default()
    };
    SpreadParams::resolve(n, q, m, alpha, &check).map_err(param_failure)
}

fn verify_claim1(cfg: &RunConfig) -> Result<Report, Failure> {
    let p = params(cfg)?;
    let tol = cfg.get_or("tol", 1e-3)?;
    let cert = claim1_verify(&p, tol).map_err(construction_failure)?;
    let (code, word) = outcome_code(cert.outcome());
    Ok(Report {
        code,
        summary: format!("{word} for n={} q={} m={}", p.n, p.q, p.m),
        json: envelope("verify-claim1", &cert, cfg)?,
        svg: None,
        csv: None,
    })
}

fn spread(cfg: &RunConfig) -> Result<Report, Failure> {
    let p = params(cfg)?;
    if !p.certified {
        return Err(Failure::usage(format!(
            "m={} does not satisfy the smallness requirements {:?}; use --m auto",
            p.m, p.violations
        )));
    }
    let center = cfg
        .point("center")?
        .ok_or_else(|| Failure::usage("--center x,y is required"))?;
    let ball = Ball::new(center, p.scale()).map_err(geometry_failure)?;
    let mode = match cfg.get_or("mode", "pipeline".to_string())?.as_str() {
        "pipeline" => SearchMode::Pipeline,
        "direct" => SearchMode::Direct,
        other => {
            return Err(Failure::usage(format!(
                "--mode: expected pipeline or direct, got {other:?}"
            )))
        }
    };
    let options = SearchOptions {
        k_max: cfg.get("kmax")?,
        tol: cfg.get_or("tol", 1e-2)?,
        grid_spacing: cfg.get("grid-spacing")?,
        mode,
        ..SearchOptions::default()
    };
    let cert = spreading_search(&p, &ball, &options).map_err(construction_failure)?;
    let csv = match cfg.output("csv") {
        Some(_) => Some(points_to_csv(
            event_cloud(&p, &cert, &options)
                .map_err(construction_failure)?
                .points(),
        )),
        None => None,
    };
    let (code, word) = outcome_code(cert.outcome());
    Ok(Report {
        code,
        summary: format!(
            "{word}: k={} (k_max {}), target centre ({}, {}), radius {}",
            cert.k,
            cert.k_max,
            cert.target_ball.center.x,
            cert.target_ball.center.y,
            cert.target_ball.radius
        ),
        json: envelope("spread", &cert, cfg)?,
        svg: None,
        csv,
    })
}

#[derive(Serialize)]
struct FigureSummary {
    kind: &'static str,
    params: ParamsRecord,
    identity_map: bool,
    delta: f64,
    segment: Segment,
    tol: f64,
    curve_tolerance: f64,
    vertices: usize,
    runs: usize,
    square_density: DensityVerdict,
}

fn figure(cfg: &RunConfig) -> Result<Report, Failure> {
    let p = params(cfg)?;
    let identity = cfg.flag("identity-map")?;
    let tol: f64 = cfg.get_or("tol", 1e-3)?;
    let eps: f64 = cfg.get_or("eps", p.scale())?;
    let spacing: f64 = cfg.get_or("grid-spacing", eps / 4.0)?;
    let h = if identity {
        MapExpr::identity()
    } else {
        build_h(&p)
    };
    let (_, j) = segments(&p);
    let line = refine_segment_image(&h, j.a, j.b, tol).map_err(geometry_failure)?;
    let n = p.n as f64;

    let cloud = line.clone().into_cloud();
    let verdict =
        eps_dense_square(&cloud, Point::ORIGIN, n, eps, spacing).map_err(geometry_failure)?;
    let grid = WitnessGrid::for_square(n, spacing);
    let index = cloud.index(eps);
    let limit = eps - grid.spacing() * SQRT_2 / 2.0;
    let nodes: Vec<(Point, bool)> = grid
        .nodes(Point::ORIGIN)
        .map(|z| (z, index.has_point_within(z, limit)))
        .collect();

    let title = if identity {
        format!("J segment, n={} q={} m={}", p.n, p.q, p.m)
    } else {
        format!("image of J under h, n={} q={} m={}", p.n, p.q, p.m)
    };
    let document = svg::render(&svg::Figure {
        n: p.n,
        title: &title,
        curve: &line.points,
        nodes: &nodes,
    });
    let status = format!(
        "{} vertices, square density {}",
        line.len(),
        verdict.verdict.as_str()
    );
    let summary = FigureSummary {
        kind: "figure",
        params: p.record(),
        identity_map: identity,
        delta: p.delta(),
        segment: j,
        tol,
        curve_tolerance: line.tolerance,
        vertices: line.len(),
        runs: svg::clip_runs(&svg::Frame::for_n(p.n), &line.points).len(),
        square_density: verdict,
    };
    Ok(Report {
        code: 0,
        summary: status,
        json: envelope("figure", &summary, cfg)?,
        csv: cfg.output("csv").map(|_| points_to_csv(&line.points)),
        svg: Some(document),
    })
}

fn widths(cfg: &RunConfig) -> Result<Report, Failure> {
    let map = match cfg.get_or("map", "conjugate".to_string())?.as_str() {
        "conjugate" => params(cfg)?.conjugated_rotation(),
        "rotation" => MapExpr::translate(alpha(cfg)?, 0.0),
        "identity" => MapExpr::identity(),
        other => {
            return Err(Failure::usage(format!(
                "--map: expected conjugate, rotation or identity, got {other:?}"
            )))
        }
    };
    let count: usize = cfg.get_or("directions", 16)?;
    if count == 0 {
        return Err(Failure::usage("--directions must be positive"));
    }
    let dirs = default_directions(count);
    let threshold: f64 = cfg.get_or("threshold", default_threshold(&dirs))?;
    let k_max: u64 = cfg.get_or("kmax", 64)?;
    let tol: f64 = cfg.get_or("tol", 1e-3)?;
    let cert =
        width_growth_certificate(&map, &dirs, threshold, k_max, tol).map_err(geometry_failure)?;
    let grown = cert.records.iter().filter(|r| r.k.is_some()).count();
    Ok(Report {
        code: if cert.pass { 0 } else { 1 },
        summary: format!(
            "{grown}/{} directions exceeded width {threshold}",
            dirs.len()
        ),
        json: envelope("widths", &cert, cfg)?,
        svg: None,
        csv: None,
    })
}

fn rotnum(cfg: &RunConfig) -> Result<Report, Failure> {
    let omega: f64 = cfg.require("omega")?;
    let lift = match cfg.get_or("family", "rigid".to_string())?.as_str() {
        "rigid" => CircleLift::Rigid { omega },
        "arnold" => {
            CircleLift::arnold(omega, cfg.require("coupling")?).map_err(geometry_failure)?
        }
        other => {
            return Err(Failure::usage(format!(
                "--family: expected rigid or arnold, got {other:?}"
            )))
        }
    };
    if !omega.is_finite() {
        return Err(Failure::usage("--omega must be finite"));
    }
    let iters: u64 = cfg.get_or("iters", 1_000_000)?;
    if iters == 0 {
        return Err(Failure::usage("--iters must be positive"));
    }
    let y0: f64 = cfg.get_or("y0", 0.0)?;
    let est = rotation_number(&lift, iters, y0);
    Ok(Report {
        code: 0,
        summary: format!("rotation number {} ± {}", est.estimate, est.error_bound),
        json: envelope("rotnum", &est, cfg)?,
        svg: None,
        csv: None,
    })
}

#[derive(Serialize)]
struct RhoSummary {
    kind: &'static str,
    map: String,
    rho: f64,
    grid_density: u32,
    samples: usize,
    closed_form: f64,
    grid_sup: f64,
    relative_error: f64,
    norm: &'static str,
    d_rho_identity: f64,
}

/// Relative agreement required between the closed form and the grid.
const RHO_AGREEMENT: f64 = 1e-6;

fn rho(cfg: &RunConfig) -> Result<Report, Failure> {
    let amplitude: i64 = match cfg.raw("m") {
        Some("auto") => return Err(Failure::usage("rho needs a numeric --m amplitude")),
        _ => cfg.require("m")?,
    };
    let q: u32 = cfg.require("q")?;
    if q == 0 {
        return Err(Failure::usage("--q must be positive"));
    }
    let rho: f64 = cfg.get_or("rho", 0.1)?;
    let density: u32 = cfg.get_or("grid-density", 64)?;
    let query = BandNormQuery::new(rho, density).map_err(|e| Failure::usage(e.to_string()))?;
    let e = MapExpr::vshear(amplitude, q);
    let closed = e
        .closed_form_band_norm(rho)
        .expect("single shear has a closed form");
    let grid = e.band_norm_grid(&query);
    let relative_error = if closed == 0.0 {
        grid.abs()
    } else {
        (grid - closed).abs() / closed
    };
    let body = RhoSummary {
        kind: "rho",
        map: e.to_string(),
        rho,
        grid_density: density,
        samples: query.boundary_samples().len(),
        closed_form: closed,
        grid_sup: grid,
        relative_error,
        norm: POINTWISE_NORM,
        d_rho_identity: d_rho(&e, &MapExpr::identity(), &query),
    };
    Ok(Report {
        code: if relative_error <= RHO_AGREEMENT {
            0
        } else {
            1
        },
        summary: format!("closed form {closed}, grid {grid}, relative error {relative_error:e}"),
        json: envelope("rho", &body, cfg)?,
        svg: None,
        csv: None,
    })
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    kind: &'static str,
    file: &'a str,
    command: &'a str,
    reproduced: bool,
    first_difference: Option<usize>,
}

/// Recomputes a certificate from its recorded inputs and compares bytes.
pub fn verify(path: &Path) -> Result<Report, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{} is not JSON: {e}", path.display())))?;
    let command = doc
        .get("command")
        .and_then(Value::as_str)
        .filter(|c| COMMANDS.contains(c))
        .ok_or_else(|| Failure::usage("certificate names no known command"))?;
    let inputs = doc
        .get("inputs")
        .and_then(Value::as_object)
        .ok_or_else(|| Failure::usage("certificate has no inputs"))?;
    let mut values = BTreeMap::new();
    for (k, v) in inputs {
        let v = v
            .as_str()
            .ok_or_else(|| Failure::usage(format!("input {k} is not a string")))?;
        values.insert(k.clone(), v.to_string());
    }
    let mut cfg = RunConfig::default();
    for (k, v) in values {
        cfg.set(&k, v)?;
    }
    let again = run(command, &cfg)?;
    let first_difference = text
        .lines()
        .zip(again.json.lines())
        .position(|(a, b)| a != b)
        .or_else(|| {
            (text != again.json).then(|| text.lines().count().min(again.json.lines().count()))
        })
        .map(|i| i + 1);
    let reproduced = text == again.json;
    let file = path.display().to_string();
    let body = VerifySummary {
        kind: "verify",
        file: &file,
        command,
        reproduced,
        first_difference,
    };
    let mut json =
        serde_json::to_string_pretty(&body).map_err(|e| Failure::resource(e.to_string()))?;
    json.push('\n');
    Ok(Report {
        code: if reproduced { 0 } else { 1 },
        summary: match first_difference {
            None => format!("verify: {file} reproduced byte for byte"),
            Some(line) => format!("verify: {file} differs from the recomputation at line {line}"),
        },
        json,
        svg: None,
        csv: None,
    })
}
