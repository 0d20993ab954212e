use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sfkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfkit"))
        .args(args)
        .env_remove("SFKIT_TOL")
        .output()
        .expect("sfkit runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/scenarios")
        .join(name)
        .display()
        .to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn linear_cross_both_methods() {
    let file = scenario("linear_cross.json");
    for method in ["endpoints", "partition"] {
        let out = sfkit(&["path", "-i", &file, "--method", method]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(json(&out)["sf"], 1);
    }
}

#[test]
fn path_report_matches_golden() {
    let out = sfkit(&["path", "--example", "linear_cross"]);
    assert_eq!(code(&out), 0);
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/path_linear_cross.json");
    let expected = std::fs::read_to_string(golden).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn schema_violation_exits_2() {
    let out = sfkit(&["path", "-i", &scenario("broken.json")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown field `matrix`"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn kind_mismatch_and_missing_source_exit_2() {
    let out = sfkit(&["reduce", "-i", &scenario("linear_cross.json")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("does not match"));
    assert_eq!(code(&sfkit(&["path"])), 2);
    assert_eq!(code(&sfkit(&["path", "--example", "nope"])), 2);
    assert_eq!(code(&sfkit(&["path", "--random", "--dim", "3", "--example", "linear_cross"])), 2);
}

#[test]
fn random_reduction_holds() {
    let out = sfkit(&["reduce", "--random", "--dim", "8", "--codim", "2", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["lhs"], r["rhs"]);
    assert_eq!(r["dim"], 8);
    assert_eq!(r["codim"], 2);
    for side in ["terms_a", "terms_b"] {
        assert_eq!(r[side].as_object().unwrap().len(), 3);
    }
}

#[test]
fn reduction_batch_holds() {
    let out = sfkit(&["reduce", "--random", "--dim", "6", "--codim", "2", "--seed", "100", "--count", "40", "--degenerate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["violations"], 0);
    let runs = r["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 40);
    assert_eq!(runs[3]["seed"], 103);
}

#[test]
fn reports_are_reproducible() {
    let args = ["vary", "--random", "--dim", "6", "--codim", "2", "--seed", "3"];
    let a = sfkit(&args);
    let b = sfkit(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn rotating_line_has_zero_flow() {
    let out = sfkit(&["vary", "-i", &scenario("rotating_line.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["sf_full"], 0);
    assert_eq!(r["sf_varying"], 0);
}

#[test]
fn trivializations_agree_from_cli() {
    let flow = |t: &str| {
        let out = sfkit(&["vary", "--random", "--dim", "8", "--codim", "2", "--seed", "11", "--trivialization", t]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        json(&out)["sf_varying"].clone()
    };
    assert_eq!(flow("identity"), flow("coordinate"));
}

#[test]
fn sphere_equator_report() {
    let out = sfkit(&["geodesic", "--example", "sphere_equator", "--modes", "16"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["sf"], -1);
    assert_eq!(r["i_maslov"], 2);
    assert_eq!(r["residual_periodic"], 0);
    assert_eq!(r["residual_dirichlet"], 0);
    assert_eq!(r["convergence"]["at_2m"], -1);
}

#[test]
fn geodesic_scenario_file() {
    let out = sfkit(&["geodesic", "-i", &scenario("sphere.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["modes"], 8);
    assert_eq!(r["n_per"], 3);
}

#[test]
fn flat_torus_is_trivial() {
    let out = sfkit(&["geodesic", "--example", "flat_torus", "--modes", "8", "--n", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    for key in ["sf", "sf_dirichlet", "i_maslov", "i_conc", "n0", "dim_per_cap_0", "n_minus_g"] {
        assert_eq!(r[key], 0, "{key}");
    }
    assert_eq!(r["n_per"], 3);
}

#[test]
fn lorentz_product_reports_nonzero_residuals() {
    // the timelike flat direction leaves the flow at -1 while the Maslov
    // side counts the initial negative direction of g
    let out = sfkit(&["geodesic", "--example", "lorentz_product", "--modes", "16"]);
    assert_eq!(code(&out), 1);
    let r = json(&out);
    assert_eq!(r["sf"], -1);
    assert_eq!(r["i_maslov"], 3);
    assert_eq!(r["n_minus_g"], 1);
    assert_eq!(r["residual_periodic"], 2);
    assert_eq!(r["holds"], false);
}

#[test]
fn unresolved_modes_exit_3() {
    let out = sfkit(&["geodesic", "--example", "constant_curvature", "--curvature", "-1440", "--modes", "2"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("not stabilized"), "{}", stderr(&out));
}

#[test]
fn tolerance_from_environment() {
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_sfkit"))
            .args(["path", "--example", "linear_cross"])
            .env("SFKIT_TOL", tol)
            .output()
            .unwrap()
    };
    let out = run("1e-6");
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["tolerance"]["rel_zero"], 1e-6);
    assert_eq!(r["tolerance"]["source"], "SFKIT_TOL");
    assert_eq!(code(&run("small")), 2);
    assert_eq!(code(&run("-1")), 2);
}

#[test]
fn output_file_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let trace = dir.path().join("trace.csv");
    let out = sfkit(&[
        "path", "--example", "linear_cross",
        "-o", report.to_str().unwrap(),
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["sf"], 1);
    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,lambda_1,lambda_2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 201);
    // the crossing eigenvalue 2t - 1 at t = 1/2
    let mid: Vec<f64> = rows[100].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((mid[0] - 0.5).abs() < 1e-12 && mid[1].abs() < 1e-12);
}

#[test]
fn grassmann_example() {
    let out = sfkit(&["grassmann", "--example", "coordinate_planes"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["fredholm_index"], 1);
    assert_eq!(r["projection_restriction_index"], 1);
    assert_eq!(r["relative_dimension"], 0);
    assert_eq!(r["intersection_dim"], 1);
}

#[test]
fn examples_are_listed() {
    for args in [&["--list-examples"][..], &["list-examples"][..]] {
        let out = sfkit(args);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8(out.stdout).unwrap();
        for name in ["linear_cross", "rotating_line", "sphere_equator", "lorentz_product", "flat_torus", "constant_curvature"] {
            assert!(text.contains(name), "{name}");
        }
    }
}

#[test]
fn timings_are_opt_in() {
    let out = sfkit(&["path", "--example", "linear_cross"]);
    assert!(json(&out).get("elapsed_ms").is_none());
    let out = sfkit(&["path", "--example", "linear_cross", "--timings"]);
    assert!(json(&out)["elapsed_ms"].is_number());
}

#[test]
fn curvature_shift_is_reported() {
    // sphere with Rbar shifted by +1: still one negative direction, 2pi > 1
    let out = sfkit(&["geodesic", "--example", "sphere_equator", "--modes", "8", "--shift", "1"]);
    let r = json(&out);
    assert_eq!(r["curvature_shift"], 1.0);
    assert_eq!(r["frame"]["Rbar"]["coeffs"][0][0], 1.0);
}
