use std::process::{Command, Output};

use serde_json::Value;

fn epr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn bell_quantum_margin() {
    let v = stdout_json(&epr(&["bell", "--model", "quantum"]));
    assert_eq!(v["schema"], 1);
    assert!((v["margin"].as_f64().unwrap() - 0.207107).abs() < 1e-6);
    assert_eq!(v["verdict"], "violated");
}

#[test]
fn bell_from_count_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.json");
    let counts = r#"{"1": {"00": 10, "01": 40, "10": 40, "11": 10},
                    "2": {"00": 25, "01": 25, "10": 25, "11": 25},
                    "3": {"00": 40, "01": 10, "10": 10, "11": 40}}"#;
    std::fs::write(&path, counts).unwrap();
    let v = stdout_json(&epr(&["bell", "--counts", path.to_str().unwrap()]));
    assert!((v["t1"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["trials"], serde_json::json!([100, 100, 100]));
}

#[test]
fn branch_three_runs() {
    let out = epr(&[
        "branch",
        "--i",
        "3",
        "--ne",
        "1",
        "--nu",
        "2",
        "--enumerate",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let q: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(q, ["8", "12", "6", "1"]);

    let v = stdout_json(&epr(&["branch", "--i", "3"]));
    assert_eq!(v["distribution"]["total"], "27");
    assert_eq!(v["window_fraction_exact"], "4/9");
}

#[test]
fn trials_are_reproducible() {
    let a = epr(&["trials", "--model", "classical", "--pairs", "800", "--seed", "7"]);
    let b = epr(&["trials", "--model", "classical", "--pairs", "800", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 801);
    assert!(text.starts_with("pair_index,a,b,d,A,B,miss\n"));
}

#[test]
fn trials_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    for ext in ["json", "csv"] {
        let log = dir.path().join(format!("log.{ext}"));
        let log = log.to_str().unwrap();
        let out = epr(&[
            "trials", "--model", "quantum", "--pairs", "20000", "--seed", "3", "--out", log,
        ]);
        assert!(out.status.success());
        let v = stdout_json(&epr(&["analyze", log]));
        assert_eq!(v["report"]["verdict"], "violated");
        assert_eq!(v["frequencies"].as_object().unwrap().len(), 4);
    }
}

#[test]
fn curves_write_svg_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("curves.svg");
    let out = epr(&["curves", "--bars", "--out", svg.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 91);
    let bars = std::fs::read_to_string(dir.path().join("curves.bars.csv")).unwrap();
    assert_eq!(bars.lines().count(), 1 + 3 * 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn partition_svg_is_deterministic() {
    let args = [
        "partition",
        "--kind",
        "grid",
        "--big-m",
        "40",
        "--m",
        "30",
        "--format",
        "svg",
        "--pointer",
        "0.01,0.02",
    ];
    let a = epr(&args);
    let b = epr(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains(r#""equal":400"#));
    assert!(text.contains(r#""unequal":3600"#));
}

#[test]
fn partition_json_for_arcs() {
    let v = stdout_json(&epr(&["partition", "--kind", "arcs", "--d", "2"]));
    assert_eq!(v["kind"], "arcs");
    assert_eq!(v["schema"], 1);
    assert_eq!(v["regions"].as_array().unwrap().len(), 8);
}

#[test]
fn grid_pr_at_one_third() {
    let v = stdout_json(&epr(&["grid", "--big-m", "40", "--m", "30"]));
    assert_eq!(v["pr_equal_exact"], "1/10");
    assert_eq!(v["counts"]["equal"], 400);
}

#[test]
fn act_demo_reports() {
    let v = stdout_json(&epr(&[
        "act-demo", "--kind", "arcs", "--d", "2", "--trials", "20000", "--seed", "1",
    ]));
    assert!((v["freq_equal"].as_f64().unwrap() - 0.5).abs() < 0.015);
    let v = stdout_json(&epr(&["act-demo", "--failure", "--kind", "grid", "--pointers", "200"]));
    assert!(v["miss_fraction"].as_f64().unwrap() > 0.0);
    let v = stdout_json(&epr(&["act-demo", "--failure", "--kind", "arcs", "--pointers", "200"]));
    assert_eq!(v["miss_fraction"].as_f64().unwrap(), 0.0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(epr(&["bogus"]).status.code(), Some(2));
    assert_eq!(epr(&["bell", "--nope"]).status.code(), Some(2));
    assert_eq!(epr(&["curves", "--points", "1"]).status.code(), Some(2));
}

#[test]
fn model_errors_are_json() {
    let out = epr(&["trials", "--model", "quantum", "--mode", "external_act"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["error"]["kind"], "model");

    let out = epr(&["analyze", "/nonexistent/log.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "io");
}
