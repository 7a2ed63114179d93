use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn kwarp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwarp")).args(args).arg("--out").arg(out).output().expect("kwarp runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn certify_half_fubini_study() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["certify", "--family", "half-fs", "--n", "4"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&out);
    assert!((s["min_lambda"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(s["status"], "pass");
    for f in ["config.echo", "summary.json", "profile.csv", "plot.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "s,a,a1,a2,a3,b,b1,b2,b3,lambda"));
}

#[test]
fn certify_hk_notes_closure_failure() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["certify", "--family", "hk", "--k", "3", "--n", "4"], &out);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&out);
    assert!((s["min_lambda_interior"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(s["closure"]["smooth"], false);
    assert!(stdout(&o).contains("closure fails"));
}

#[test]
fn certify_flat_cone_fails_and_names_conditions() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["certify", "--family", "flat-cone"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("condition (1)"));
    let s = summary(&out);
    assert!(s["min_lambda_interior"].as_f64().unwrap().abs() < 1e-9);
    assert!(!s["violated_conditions"].as_array().unwrap().is_empty());
}

#[test]
fn steady_reports_one_twelfth() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["steady", "--n", "2"], &out);
    assert_eq!(o.status.code(), Some(0));
    let k = summary(&out)["min_sectional_over_R"].as_f64().unwrap();
    assert!((k - 1.0 / 12.0).abs() < 1e-3 / 12.0, "{k}");
}

#[test]
fn acintegral_prints_residual() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["acintegral", "--a", "1", "--n", "2"], &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("residual = "));
    assert!(summary(&out)["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn expander_is_accepted_at_default_radius() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["expander", "--n", "3", "--alpha", "4"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&out);
    assert!(s["slope_residual"].as_f64().unwrap() <= 1e-3);
    assert!(s["ratio_residual"].as_f64().unwrap() <= 1e-2);
    assert!(s["min_lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn glue_lift_certify_chain() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("glue");
    assert_eq!(kwarp(&["glue", "--k", "100", "--i", "400"], &g).status.code(), Some(0));
    let profile = g.join("profile.csv");
    let p = profile.to_str().unwrap();
    let l = tmp.path().join("lift");
    let o = kwarp(&["lift", "--profile", p], &l);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&l);
    assert_eq!(s["check"]["agree"], true);
    let (lo, hi, d) = (s["diam_lower"].as_f64().unwrap(), s["diam_upper"].as_f64().unwrap(), s["diam_direct"].as_f64().unwrap());
    assert!(lo <= d && d <= hi);
    let c = tmp.path().join("certify");
    let o = kwarp(&["certify", "--profile", p], &c);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&c);
    assert!(s["min_lambda"].as_f64().unwrap() > 0.0);
    assert!(s["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn short_flow_writes_trace() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["flow", "--w", "0.05", "--cells", "200", "--t-end", "2.5e-4"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,L,min_lambda,sup_rm_t,vol"));
    let s = summary(&out);
    assert!(s["min_lambda_late"].is_null());
    assert_eq!(s["monotone"], true);
}

#[test]
fn summaries_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(kwarp(&["glue", "--k", "25", "--k-min", "20"], dir).status.code(), Some(0));
    }
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn json_only_writes_just_the_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["certify", "--family", "half-fs", "--json-only"], &out);
    assert_eq!(o.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&o.stdout).expect("stdout is JSON");
    assert_eq!(printed, summary(&out));
    let names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, vec!["summary.json".to_string()]);
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# h_k run\ncommand = certify\nfamily = hk\nk = 4\nn = 5\n").unwrap();
    let out = tmp.path().join("run");
    let o = kwarp(&["certify", "--config", cfg.to_str().unwrap(), "--n", "3"], &out);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["n"], 3);
    assert_eq!(s["family"], "hk");
    let echo = fs::read_to_string(out.join("config.echo")).unwrap();
    assert!(echo.starts_with("command = certify\n"));
    assert!(echo.contains("k = 4\n") && echo.contains("n = 3\n"));
}

#[test]
fn bad_configs_exit_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "family = hk\nbogus = 1\n").unwrap();
    let out = tmp.path().join("run");
    let cases: Vec<Vec<&str>> = vec![
        vec!["certify", "--config", cfg.to_str().unwrap()],
        vec!["certify", "--family", "nope"],
        vec!["certify", "--n", "x"],
        vec!["steady", "--n", "1"],
        vec!["expander", "--alpha", "0.5"],
        vec!["nosuch"],
    ];
    for args in cases {
        let o = kwarp(&args, &out);
        assert_eq!(o.status.code(), Some(4), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
