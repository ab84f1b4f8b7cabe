//! `torus-spread`: certificates and figures for conjugated torus rotations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use torus_spread_cli::commands::{self, Report};
use torus_spread_cli::config::RunConfig;
use torus_spread_cli::{output, Failure, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(
    name = "torus-spread",
    version,
    about = "Certificates and figures for conjugated torus rotations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify that h maps I_δ into the small ball and J_δ densely over the square.
    VerifyClaim1,
    /// Search for an iterate of the source ball that is 1/n-dense in a ball of radius n.
    Spread,
    /// Draw the image of J_δ under h with the square and witness grid (SVG).
    Figure,
    /// Check that iterated unit segments outgrow a width threshold in every direction.
    Widths,
    /// Estimate the rotation number of a circle lift.
    Rotnum,
    /// Compare the closed-form band norm of a shear with its boundary-grid supremum.
    Rho,
    /// Recompute a JSON certificate from its recorded inputs and compare bytes.
    Verify { file: PathBuf },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Key=value file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Scale: source balls of radius 1/n, target balls of radius n.
    #[arg(long, global = true, allow_hyphen_values = true)]
    n: Option<String>,
    /// Shear frequency; replaced by 2qn unless it is a multiple of n with q >= 2n.
    #[arg(long, global = true, allow_hyphen_values = true)]
    q: Option<String>,
    /// Vertical shear amplitude, or `auto` for the smallest admissible value.
    #[arg(long, global = true, allow_hyphen_values = true)]
    m: Option<String>,
    /// Rotation angle (default √2 − 1).
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<String>,
    /// Curve tolerance for refined images.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    kmax: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid_spacing: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid_density: Option<String>,
    /// Number of equally spaced directions.
    #[arg(long, global = true, allow_hyphen_values = true)]
    directions: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    threshold: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    iters: Option<String>,
    /// Source ball centre as x,y.
    #[arg(long, global = true, allow_hyphen_values = true)]
    center: Option<String>,
    /// Write the JSON certificate here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<String>,
    /// Write the relevant point cloud as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<String>,
    /// Write the figure here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    svg: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Circle lift family: rigid or arnold.
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    coupling: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    y0: Option<String>,
    /// Map for `widths`: conjugate, rotation or identity.
    #[arg(long, global = true)]
    map: Option<String>,
    /// Search mode for `spread`: pipeline or direct.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Draw J_δ itself instead of its image.
    #[arg(long, global = true)]
    identity_map: bool,
    /// Accept an alpha that looks rational, recording the fraction.
    #[arg(long, global = true)]
    allow_rational: bool,
}

impl Flags {
    fn to_config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        let values = [
            ("n", &self.n),
            ("q", &self.q),
            ("m", &self.m),
            ("alpha", &self.alpha),
            ("eps", &self.eps),
            ("tol", &self.tol),
            ("kmax", &self.kmax),
            ("grid-spacing", &self.grid_spacing),
            ("rho", &self.rho),
            ("grid-density", &self.grid_density),
            ("directions", &self.directions),
            ("threshold", &self.threshold),
            ("iters", &self.iters),
            ("center", &self.center),
            ("json", &self.json),
            ("csv", &self.csv),
            ("svg", &self.svg),
            ("seed", &self.seed),
            ("family", &self.family),
            ("omega", &self.omega),
            ("coupling", &self.coupling),
            ("y0", &self.y0),
            ("map", &self.map),
            ("mode", &self.mode),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                cfg.set(key, v.clone())?;
            }
        }
        for (key, on) in [
            ("identity-map", self.identity_map),
            ("allow-rational", self.allow_rational),
        ] {
            if on {
                cfg.set(key, "true")?;
            }
        }
        Ok(cfg)
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// The SVG goes to `--svg` or stdout; the JSON goes to `--json`, or to
/// stdout unless the SVG already took it.
fn emit(report: &Report, cfg: &RunConfig) -> Result<(), Failure> {
    let write = |path: &str, text: &str| {
        output::write_atomic(Path::new(path), text.as_bytes())
            .map_err(|e| Failure::resource(format!("{e:#}")))
    };
    if let (Some(path), Some(csv)) = (cfg.output("csv"), &report.csv) {
        write(path, csv)?;
    }
    let mut stdout_taken = false;
    if let Some(doc) = &report.svg {
        match cfg.output("svg") {
            Some(path) => write(path, doc)?,
            None => {
                print!("{doc}");
                stdout_taken = true;
            }
        }
    }
    match cfg.output("json") {
        Some(path) => write(path, &report.json)?,
        None if !stdout_taken => print!("{}", report.json),
        None => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let flags = cli.flags.to_config()?;
    let cfg = match &cli.flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?.merged(flags)
        }
        None => flags,
    };
    let report = match &cli.command {
        Command::Verify { file } => commands::verify(file)?,
        Command::VerifyClaim1 => commands::run("verify-claim1", &cfg)?,
        Command::Spread => commands::run("spread", &cfg)?,
        Command::Figure => commands::run("figure", &cfg)?,
        Command::Widths => commands::run("widths", &cfg)?,
        Command::Rotnum => commands::run("rotnum", &cfg)?,
        Command::Rho => commands::run("rho", &cfg)?,
    };
    emit(&report, &cfg)?;
    eprintln!("{} (exit {})", report.summary, report.code);
    Ok(report.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    configure_threads();
    let code = run(cli).unwrap_or_else(|f| {
        eprintln!("error: {}", f.message);
        f.code
    });
    ExitCode::from(code as u8)
}
