use std::process::{Command, Output};

use serde_json::Value;

fn holomoment(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holomoment"))
        .args(args)
        .env_remove("HOLOMOMENT_CACHE")
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json", "--no-timestamp"]);
    let out = holomoment(&all);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn kloosterman_report() {
    let v = json(&["kloosterman", "--n", "1", "--m", "1", "--c", "6"]);
    assert_eq!(v["meta"]["command"], "kloosterman");
    assert!((v["data"]["value"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(v["meta"].get("timestamp").is_none());
}

#[test]
fn bessel_reports_its_method() {
    let v = json(&["bessel", "--l", "11", "--x", "3"]);
    let j = v["data"]["value"].as_f64().unwrap();
    // J_11(3) from mpmath
    assert!((j - 1.79398966234745e-6).abs() < 1e-17, "{j}");
    assert!(v["data"]["method"].is_string());
}

#[test]
fn sym2_value_of_delta() {
    let v = json(&["lvalue", "--kind", "sym2-at1", "--k", "12"]);
    let text = v.to_string();
    assert!(text.contains("0.6317929457"), "{text}");
}

#[test]
fn petersson_checks_pass() {
    let v = json(&["petersson-verify", "--k", "12", "--nmax", "4", "--cmax", "100"]);
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn text_output_ends_with_a_tally() {
    let out = holomoment(&["kloosterman", "--n", "2", "--m", "3", "--c", "35"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(text.trim_end().ends_with("0 failed"), "{text}");
}

#[test]
fn out_dir_holds_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = holomoment(&["forms", "--k", "24", "--n", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["command"], "forms");
    let checks = std::fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(checks.starts_with("name,"), "{checks}");
}

#[test]
fn cache_directory_is_filled_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("c");
    let args = ["forms", "--k", "24", "--n", "20", "--cache", cache.to_str().unwrap(), "--format", "json", "--no-timestamp"];
    let a = holomoment(&args);
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
    let b = holomoment(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        &["forms", "--k", "13"][..],
        &["window-average", "--K", "50", "--H", "8"],
        &["no-such-command"],
        &["kloosterman", "--n", "1", "--m", "1"],
        &["kloosterman", "--n", "1", "--m", "1", "--c", "0"],
    ] {
        let o = holomoment(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_with_1() {
    let o = holomoment(&["lvalue", "--kind", "sym2-at1", "--k", "24", "--method", "trace-inversion"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_exits_cleanly() {
    let o = holomoment(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify-all"));
}
