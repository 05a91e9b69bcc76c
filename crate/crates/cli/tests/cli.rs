use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kahlerkit")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const HYPERBOLIC: &str = r#"{"dim":2,"weights":[1,1],"lie_basis":[[[[0,1],[0,0]],[[0,0],[0,-1]]]]}"#;
const SHEAR: &str = "[[[1,0],[0.5,0]],[[0,0],[1,0]]]";
const SMALL_CUBIC: &str = "[[0.1,0],[0,0],[0.05,0],[0,0.1]]";

#[test]
fn aeps_reports_det_one_and_order_three() {
    let out = run(&["cubics", "aeps", "--eps", "1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["order"], 3);
    assert!((v["det"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["det"][1].as_f64().unwrap().abs() < 1e-12);
    let m = &v["matrix"];
    assert_eq!(m[0][0][0], -0.5);
    assert_eq!(m[0][1][0], 1.5);
    assert_eq!(m[1][0][0], -0.5);
    assert_eq!(m[1][1][0], -0.5);
}

#[test]
fn aeps_accepts_complex_eps_and_rejects_zero() {
    assert_eq!(code(&run(&["cubics", "aeps", "--eps", "[0.3, -0.7]"])), 0);
    assert_eq!(code(&run(&["cubics", "aeps", "--eps", "0"])), 2);
}

#[test]
fn flow_trace_with_zero_generator_is_constant() {
    let out = run(&[
        "--output", "csv", "flow", "trace", "--xi", "[0,0,0]", "--point", "[[1,0],[0,1]]", "--tmin", "-1", "--tmax",
        "1", "--samples", "5",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re0,im0,re1,im1,phi,radius2"));
    let rows: Vec<Vec<String>> =
        lines.map(|l| l.split(',').skip(1).map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn flow_monotonicity_passes() {
    let out = run(&["flow", "monotonicity", "--xi", "[0.3,1,-0.2]", "--point", "[[1,0],[0.5,0.2]]", "--tmin", "-2", "--tmax", "2", "--samples", "401"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["pass"], true);
}

#[test]
fn suite_is_deterministic_per_seed() {
    let args = ["--seed", "42", "suite", "--scale", "0.02", "--grid", "12"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["failed"], 0);
    assert_eq!(v["seed"], 42);
}

#[test]
fn cartan_exit_codes() {
    let ok = run(&["cartan", "--matrix", "[[[2,0],[1,1]],[[0,0],[1,0]]]"]);
    assert_eq!(code(&ok), 0);
    assert!(json(&ok)["reconstruction_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(code(&run(&["cartan", "--matrix", "[[[1,0],[0,0]],[[0,0],[0,0]]]"])), 2);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let out = run(&["cartan", "--matrix", "[[[1,0],[0,0]],\n [[0,0],[1,0]"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2 column"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["cubics", "aeps"])), 2);
    assert_eq!(code(&run(&["--tol", "-1", "cubics", "aeps", "--eps", "1"])), 2);
    assert_eq!(code(&run(&["--output", "csv", "cubics", "aeps", "--eps", "1"])), 2);
}

#[test]
fn moment_csv_and_json() {
    let out = run(&["--output", "csv", "moment", "--rep", "circle", "--point", "[[2,0]]"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("index,value\n0,"));
    let out = run(&["moment", "--rep", "cubics", "--point", SMALL_CUBIC]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["components"].as_array().unwrap().len(), 3);
}

#[test]
fn convexity_verdicts_map_to_exit_codes() {
    let convex = run(&["convexity", "--xi", "[0.3,1,0]", "--point", "[[1,0],[0.5,0.2]]", "--radius", "1"]);
    assert_eq!(code(&convex), 0);
    let off_center = run(&[
        "convexity", "--rep", HYPERBOLIC, "--xi", "[1]", "--point", "[[0.5,0],[0.5,0]]", "--radius", "2", "--center",
        "[[2,0],[2,0]]", "--tmin", "-3", "--tmax", "3",
    ]);
    assert_eq!(code(&off_center), 1);
    assert_eq!(json(&off_center)["verdict"], "violation");
}

#[test]
fn extend_with_named_and_file_maps() {
    let out = run(&["extend", "--g", SHEAR, "--point", SMALL_CUBIC]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["map"], "discriminant-scale");

    let dir = std::env::temp_dir().join(format!("kahlerkit-map-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("map.json");
    std::fs::write(&path, r#"{"coefficients": [[1, 0], [0.5, 0]]}"#).unwrap();
    let arg = format!("@{}", path.display());
    assert_eq!(code(&run(&["extend", "--map", &arg, "--g", SHEAR, "--point", SMALL_CUBIC])), 0);

    std::fs::write(&path, r#"{"coefficients": [[1, 0]], "extra": 1}"#).unwrap();
    assert_eq!(code(&run(&["extend", "--map", &arg, "--g", SHEAR, "--point", SMALL_CUBIC])), 2);
    std::fs::remove_dir_all(&dir).unwrap();

    // outside the ball
    assert_eq!(code(&run(&["extend", "--g", SHEAR, "--point", "[[1,0],[0,0],[0,0],[0,0]]"])), 2);
}

#[test]
fn glue_verify_exit_codes_and_points_csv() {
    let dir = std::env::temp_dir().join(format!("kahlerkit-glue-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("points.csv");
    let csv_arg = csv.display().to_string();
    let out = run(&["glue", "verify", "--lambda", "0.1", "--grid", "16", "--eps", "0.5", "--points-csv", &csv_arg]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["admissible"], true);
    assert_eq!(v["report"]["positive_definite"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("re0,im0,min_eigenvalue\n"));
    std::fs::remove_dir_all(&dir).unwrap();

    assert_eq!(code(&run(&["glue", "verify", "--lambda", "0.1", "--grid", "16", "--eps", "0.01"])), 1);
    assert_eq!(code(&run(&["glue", "verify", "--potential", r#"{"kind":"quartic"}"#, "--lambda", "0.1"])), 2);
    let series = r#"{"kind":"power-series","coefficients":[1,-0.5,0.3333333333333333]}"#;
    assert_eq!(code(&run(&["glue", "verify", "--potential", series, "--lambda", "0.1", "--grid", "12", "--eps", "0.5"])), 0);
}

#[test]
fn glue_threshold_finds_lambda() {
    let out = run(&["glue", "threshold", "--eps", "0.1", "--grid", "12", "--iterations", "6"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn cubics_subcommands_on_table_rows() {
    let out = run(&["cubics", "classify", "--form", "[[0,0],[1,0],[-1,0],[-1,0]]"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["factor_type"], "I");

    let out = run(&["cubics", "stabilizer", "--form", "[[0,0],[0,0],[0,0],[1,0]]"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["dimension"], 1);
    assert_eq!(v["components"], 3);

    let out = run(&["cubics", "stabilizer", "--form", "[[0,0],[0,0],[0,0],[0,0]]"]);
    assert_eq!(json(&out)["kind"], "full-group");

    let out = run(&["cubics", "slice-demo", "--eps", "0.5"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["report"]["bundle_distance"].as_f64().unwrap() >= 1.0);

    let out = run(&["cubics", "complement", "--form", "[[0,0],[0,0],[0,0],[1,0]]", "--metric", "monomial"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["orbit_tangent_rank"], 2);

    assert_eq!(code(&run(&["cubics", "classify", "--form", "[[0,0],[1,0]]"])), 2);
}
