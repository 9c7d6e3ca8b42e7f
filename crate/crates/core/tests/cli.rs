use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mdpcg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdpcg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(dir: &Path, flights: usize) -> String {
    let path = dir.join(format!("crossing{flights}.json"));
    let p = path.to_str().unwrap().to_owned();
    let o = mdpcg(&["gen-crossing", "--flights", &flights.to_string(), "--seed", "0", "--out", &p]);
    assert!(o.status.success(), "{}", stderr(&o));
    p
}

fn series_max_risk(dir: &Path) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(dir.join("series.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "max_risk").unwrap();
    rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn synthetic_scenario_validates() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 10);
    let o = mdpcg(&["validate", &scenario]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("10 flights"));
}

#[test]
fn level_jump_is_one_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"graph": {"waypoints": ["A", "B"], "edges": [["A", "B"]]},
            "flights": [{"id": "F1", "plan": [[0, "A", 300], [60, "B", 400]], "landing_time": 60}]}"#,
    )
    .unwrap();
    let o = mdpcg(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("F1") && err.contains("entry 1"), "{err}");
}

#[test]
fn missing_file_is_an_io_failure() {
    let o = mdpcg(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scenario.json"));
}

#[test]
fn decoupled_solve_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 2);
    let out = dir.path().join("k0");
    let o = mdpcg(&["solve", &scenario, "--k", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.json", "series.csv", "risks_initial.csv", "risks_final.csv", "flows_final.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let mut rdr = csv::Reader::from_path(out.join("series.csv")).unwrap();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);

    let o = mdpcg(&["report", out.join("report.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("converged: yes, iterations: 1"), "{}", stdout(&o));
}

#[test]
fn crossing_solve_reduces_risk_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = mdpcg(&["solve", &scenario, "--max-iters", "40", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let risk = series_max_risk(&a);
    assert!(risk[risk.len() - 1] < risk[0], "{risk:?}");
    assert_eq!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());

    let flows: serde_json::Value = serde_json::from_slice(&fs::read(a.join("flows_final.json")).unwrap()).unwrap();
    let first = &flows[0]["expected_trajectory"][0]["locations"];
    let total: f64 = first.as_array().unwrap().iter().map(|l| l["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let o = mdpcg(&["report", a.join("report.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("risk reduction:"), "{}", stdout(&o));
}

#[test]
fn truncated_report_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 2);
    let out = dir.path().join("run");
    assert!(mdpcg(&["solve", &scenario, "--max-iters", "3", "--out", out.to_str().unwrap()]).status.success());
    let report = out.join("report.json");
    let text = fs::read_to_string(&report).unwrap();
    fs::write(&report, &text[..text.len() / 2]).unwrap();
    let o = mdpcg(&["report", report.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 2);
    let blocker = dir.path().join("taken");
    fs::write(&blocker, "not a directory").unwrap();
    let o = mdpcg(&["solve", &scenario, "--max-iters", "2", "--out", blocker.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_options_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = gen(dir.path(), 2);
    let o = mdpcg(&["solve", &scenario, "--step-rule", "newton"]);
    assert!(!o.status.success());
    let o = mdpcg(&["solve", &scenario, "--gap-tol", "0", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
