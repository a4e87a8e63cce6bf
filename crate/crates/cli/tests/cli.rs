//! End-to-end checks of the binary: exit codes, error reporting, file
//! round trips, and output determinism.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyadic-sharp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn unknown_flag_exits_one() {
    let out = run(&["--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validation_error_exits_one_and_names_module_error() {
    let out = run(&["a2", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("BadExponent"), "stderr: {err}");

    let out = run(&["--depth", "6", "a2", "--alpha", "0.5", "--p", "1.0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_weight_then_a2_pipeline() {
    let dir = std::env::temp_dir().join("dyadic-sharp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let weight_path = dir.join("w.json");
    let out = run(&[
        "--depth",
        "6",
        "--out",
        weight_path.to_str().unwrap(),
        "gen-weight",
        "--alpha",
        "0.5",
    ]);
    assert!(out.status.success());

    let out = run(&["a2", "--weight", weight_path.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["constant"].as_f64().unwrap() >= 1.0);
    assert_eq!(v["depth"].as_u64().unwrap(), 6);
}

#[test]
fn nonpositive_weight_rejected_on_load() {
    let dir = std::env::temp_dir().join("dyadic-sharp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"depth":1,"cells":[1.0,0.0]}"#).unwrap();
    let out = run(&["a2", "--weight", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("NonpositiveWeight"), "stderr: {err}");
}

#[test]
fn shift_apply_annihilates_constants() {
    let dir = std::env::temp_dir().join("dyadic-sharp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("const.json");
    std::fs::write(&path, r#"{"depth":3,"cells":[2,2,2,2,2,2,2,2]}"#).unwrap();
    let out = run(&["shift-apply", "--input", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for cell in v["cells"].as_array().unwrap() {
        assert!(cell.as_f64().unwrap().abs() <= 1e-14);
    }
}

#[test]
fn lerner_verify_reports_pass() {
    let dir = std::env::temp_dir().join("dyadic-sharp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("f.json");
    std::fs::write(
        &path,
        r#"{"depth":3,"cells":[16.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0]}"#,
    )
    .unwrap();
    let out = run(&[
        "lerner-verify",
        "--input",
        path.to_str().unwrap(),
        "--emit-decomposition",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    assert_eq!(v["decomposition"]["generations"][0][0][0], 3);
}

#[test]
fn domination_on_spike() {
    let dir = std::env::temp_dir().join("dyadic-sharp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.json");
    std::fs::write(
        &path,
        r#"{"depth":4,"cells":[8,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]}"#,
    )
    .unwrap();
    let out = run(&["domination", "--input", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["empirical_constant"].as_f64().unwrap().is_finite());
}

#[test]
fn selftest_passes_within_budget_and_tamper_exits_three() {
    let start = std::time::Instant::now();
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        start.elapsed().as_secs() < 300,
        "selftest must finish well inside five minutes"
    );

    let out = run(&["selftest", "--inject-tamper"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("omega-nesting") || err.contains("pointwise-domination"),
        "stderr must name the violated property: {err}"
    );
}

#[test]
fn csv_format_outside_sweep_is_a_validation_error() {
    let out = run(&["--format", "csv", "a2", "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_json_has_slope_and_rows() {
    let out = run(&["--depth", "6", "sweep", "--alphas", "0,0.5,0.75,0.875"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!(v["log_slope"].is_number() || v["log_slope"].is_null());
}

#[test]
fn hilbert_compare_smoke() {
    let out = run(&[
        "--depth",
        "7",
        "hilbert-compare",
        "--a",
        "0",
        "--b",
        "0.5",
        "--shifts",
        "16",
        "--dilations",
        "2",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["fitted_scale"].as_f64().unwrap().is_finite());
    assert!(v["relative_l2_error"].as_f64().unwrap() >= 0.0);
}
