use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use torus_spread::geometry::points_from_csv;
use torus_spread::{choose_m, eps_dense_square, Point, PointCloud, Verdict};
use torus_spread_cli::svg::parse_polylines;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-spread"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn claim1_examples() {
    let ok = run(&["verify-claim1", "--n", "1", "--q", "2", "--m", "auto"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let v = json(&ok);
    assert_eq!(v["params"]["m"], choose_m(1, 2));
    assert_eq!(v["command"], "verify-claim1");

    let bad = run(&["verify-claim1", "--n", "1", "--q", "2", "--m", "1"]);
    assert_eq!(code(&bad), 1);
    assert_eq!(json(&bad)["analytic_box_ok"], false);

    let sub = run(&["verify-claim1", "--n", "2", "--q", "3", "--m", "auto"]);
    let v = json(&sub);
    assert_eq!(v["params"]["q"], 12);
    assert_eq!(v["substituted_q"], 3);
}

#[test]
fn spread_examples() {
    let args = [
        "spread",
        "--n",
        "1",
        "--q",
        "2",
        "--m",
        "auto",
        "--alpha",
        "0.41421356237309515",
    ];
    let out = run(&[&args[..], &["--center", "0.3,0.7"]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let base = json(&out);
    assert_eq!(base["verdict"], "certified-dense");

    let shifted = json(&run(&[&args[..], &["--center", "1.3,0.7"]].concat()));
    assert_eq!(shifted["k"], base["k"]);
    let cx = |v: &Value| v["target_ball"]["center"][0].as_f64().unwrap();
    let cy = |v: &Value| v["target_ball"]["center"][1].as_f64().unwrap();
    assert!((cx(&shifted) - cx(&base) - 1.0).abs() < 1e-12);
    assert!((cy(&shifted) - cy(&base)).abs() < 1e-12);

    let rational = run(&[
        "spread", "--n", "1", "--q", "2", "--m", "auto", "--alpha", "0.5", "--center", "0,0",
    ]);
    assert_eq!(code(&rational), 64);
    assert!(stderr(&rational).contains("1/2"), "{}", stderr(&rational));
    let forced = run(&[
        "spread",
        "--n",
        "1",
        "--q",
        "2",
        "--m",
        "auto",
        "--alpha",
        "0.5",
        "--center",
        "0,0",
        "--allow-rational",
        "--kmax",
        "50",
    ]);
    assert_ne!(code(&forced), 64, "{}", stderr(&forced));
}

#[test]
fn exhausted_search_exits_3() {
    let out = run(&[
        "spread", "--n", "1", "--q", "2", "--m", "auto", "--center", "0,0", "--kmax", "5",
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("best residual"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        &["spread", "--bogus"][..],
        &["spread", "--n", "1", "--q", "2"],
        &["spread", "--n", "x", "--q", "2", "--center", "0,0"],
        &[
            "spread", "--n", "1", "--q", "2", "--m", "1", "--center", "0,0",
        ],
        &["verify-claim1", "--n", "1", "--q", "2", "--tol", "0.7"],
        &["rho", "--m", "auto", "--q", "2"],
        &[
            "rotnum",
            "--family",
            "arnold",
            "--omega",
            "0.3",
            "--coupling",
            "1.5",
        ],
        &[],
    ] {
        assert_eq!(code(&run(args)), 64, "{args:?}");
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn figure_reverifies_from_its_own_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fig.svg");
    let out = run(&[
        "figure",
        "--n",
        "1",
        "--q",
        "2",
        "--m",
        "auto",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml") && text.contains(r#"version="1.1""#));
    let points: Vec<Point> = parse_polylines(&text, 1).into_iter().flatten().collect();
    let cloud = PointCloud::new(points);
    let v = eps_dense_square(&cloud, Point::ORIGIN, 1.0, 1.0, 0.25).unwrap();
    assert_eq!(v.verdict, Verdict::CertifiedDense);
}

#[test]
fn identity_figure_is_the_straight_segment() {
    let out = run(&[
        "figure",
        "--n",
        "1",
        "--q",
        "2",
        "--m",
        "auto",
        "--identity-map",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let runs = parse_polylines(&text, 1);
    assert_eq!(runs.len(), 1);
    let delta = 2.0 / (std::f64::consts::PI * 2.0 * choose_m(1, 2) as f64);
    let centre = 0.25 / 2.0;
    for p in &runs[0] {
        assert!(p.y.abs() < 1e-5);
        assert!((p.x - centre).abs() <= delta / 2.0 + 1e-5);
    }
}

#[test]
fn figure_bytes_are_reproducible() {
    let a = run(&["figure", "--n", "1", "--q", "2", "--m", "auto"]);
    let b = run(&["figure", "--n", "1", "--q", "2", "--m", "auto"]);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_dump_has_two_full_precision_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cloud.csv");
    let out = run(&[
        "spread",
        "--n",
        "1",
        "--q",
        "2",
        "--m",
        "auto",
        "--center",
        "0.3,0.7",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let text = std::fs::read_to_string(&csv).unwrap();
    let first = text.lines().next().unwrap();
    let cols: Vec<&str> = first.split(',').collect();
    assert_eq!(cols.len(), 2);
    for c in cols {
        let mantissa = c.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{c}");
    }
    let points = points_from_csv(&text).unwrap();
    assert_eq!(points.len() as u64, v["cloud_points"].as_u64().unwrap());
}

#[test]
fn widths_and_rotnum_and_rho() {
    assert_eq!(
        code(&run(&["widths", "--map", "rotation", "--threshold", "4"])),
        1
    );
    assert_eq!(
        code(&run(&["widths", "--map", "identity", "--threshold", "4"])),
        1
    );
    let w = run(&[
        "widths",
        "--n",
        "2",
        "--q",
        "4",
        "--m",
        "auto",
        "--threshold",
        "4",
    ]);
    assert_eq!(code(&w), 0);
    let v = json(&w);
    assert_eq!(v["directions"].as_array().unwrap().len(), 16);
    assert_eq!(v["pass"], true);

    let r = json(&run(&[
        "rotnum", "--family", "rigid", "--omega", "0.25", "--iters", "1000",
    ]));
    assert_eq!(r["estimate"], 0.25);
    assert_eq!(r["error_bound"], 0.001);

    let rho = run(&["rho", "--m", "3", "--q", "2", "--rho", "0.1"]);
    assert_eq!(code(&rho), 0);
    let v = json(&rho);
    let exact = 3.0 * (0.4 * std::f64::consts::PI).cosh();
    assert!((v["closed_form"].as_f64().unwrap() - exact).abs() < 1e-12 * exact);
    assert!(v["relative_error"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["norm"], "euclidean");
}

#[test]
fn config_file_matches_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# spreading run\nn=1\nq=2\nm=auto\ncenter=0.3,0.7\n").unwrap();
    let from_file = run(&["spread", "--config", cfg.to_str().unwrap()]);
    let from_flags = run(&[
        "spread", "--n", "1", "--q", "2", "--m", "auto", "--center", "0.3,0.7",
    ]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_flags.stdout);

    let overridden = json(&run(&[
        "spread",
        "--config",
        cfg.to_str().unwrap(),
        "--center",
        "1.3,0.7",
    ]));
    assert_eq!(overridden["source_ball"]["center"][0], 1.3);

    std::fs::write(&cfg, "n=1\nradius=3\n").unwrap();
    assert_eq!(
        code(&run(&["spread", "--config", cfg.to_str().unwrap()])),
        64
    );
}

#[test]
fn recorded_inputs_round_trip_through_a_config_file() {
    let out = run(&[
        "spread", "--n", "2", "--q", "4", "--m", "auto", "--center", "0.3,0.7", "--mode", "direct",
    ]);
    let v = json(&out);
    let mut cfg = String::new();
    for (k, val) in v["inputs"].as_object().unwrap() {
        cfg.push_str(&format!("{k}={}\n", val.as_str().unwrap()));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inputs.cfg");
    std::fs::write(&path, cfg).unwrap();
    let again = run(&["spread", "--config", path.to_str().unwrap()]);
    assert_eq!(again.stdout, out.stdout);
}

fn write_certificate(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = run(&[args, &["--json", path.to_str().unwrap()]].concat());
    assert!(code(&out) <= 1, "{}", stderr(&out));
    path
}

#[test]
fn verify_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let certs = [
        write_certificate(
            dir.path(),
            "c1.json",
            &["verify-claim1", "--n", "1", "--q", "2", "--m", "auto"],
        ),
        write_certificate(
            dir.path(),
            "s.json",
            &[
                "spread", "--n", "1", "--q", "2", "--m", "auto", "--center", "0,0",
            ],
        ),
        write_certificate(dir.path(), "w.json", &["widths", "--map", "rotation"]),
        write_certificate(
            dir.path(),
            "r.json",
            &[
                "rotnum",
                "--omega",
                "0.3",
                "--family",
                "arnold",
                "--coupling",
                "0.5",
                "--iters",
                "1000",
            ],
        ),
        write_certificate(dir.path(), "rho.json", &["rho", "--m", "2", "--q", "3"]),
        write_certificate(
            dir.path(),
            "f.json",
            &[
                "figure",
                "--n",
                "1",
                "--q",
                "2",
                "--m",
                "auto",
                "--svg",
                dir.path().join("f.svg").to_str().unwrap(),
            ],
        ),
    ];
    for c in &certs {
        let out = run(&["verify", c.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}: {}", c.display(), stderr(&out));
        assert_eq!(json(&out)["reproduced"], true);
    }

    let text = std::fs::read_to_string(&certs[1]).unwrap();
    let tampered = text.replacen("\"k\": ", "\"k\": 1", 1);
    std::fs::write(&certs[1], tampered).unwrap();
    let out = run(&["verify", certs[1].to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["reproduced"], false);

    std::fs::write(&certs[0], "not json").unwrap();
    assert_eq!(code(&run(&["verify", certs[0].to_str().unwrap()])), 64);
}
