use std::path::Path;
use std::process::{Command, Output};

use oscillab::experiments::{CounterexampleConfig, LambdaRange, PhaseSpec, SweepConfig};
use oscillab::numerics::{BoxRegion, CutoffSpec};
use oscillab::wpoly::WPoly;
use serde_json::Value;
use tempfile::TempDir;

fn oscillab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscillab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn json_of(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn sweep_config(count: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(
        PhaseSpec::Poly { poly: WPoly::from_ratio_terms(&[(1, 1, 1, 1)]) },
        CutoffSpec::tensor_bump(BoxRegion::square(1.0)),
        2.into(),
        LambdaRange { min: 16.0, max: 16.0 * f64::from(1u32 << (count - 1)), count },
    );
    cfg.record_timing = false;
    cfg
}

#[test]
fn analyze_cross_term() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"terms":[{"k":2,"l":1,"a":["1","2"]},{"k":1,"l":2,"a":["-1","2"]}]}"#);
    let o = oscillab(&["analyze", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let v = json_of(&o);
    assert_eq!(v["hessian"], "-y + x");
    let roots = v["factorization"]["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    assert!((roots[0]["re"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let sharp = v["sharp_lp"].as_array().unwrap();
    let k2l1 = sharp.iter().find(|s| s["k"] == 2 && s["l"] == 1).unwrap();
    assert_eq!((k2l1["p"]["num"].as_i64(), k2l1["p"]["den"].as_i64()), (Some(3), Some(2)));
    assert_eq!((k2l1["decay"]["num"].as_i64(), k2l1["decay"]["den"].as_i64()), (Some(1), Some(3)));
}

#[test]
fn analyze_bilinear_writes_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"terms":[{"k":1,"l":1,"a":1}]}"#);
    let out = dir.path().join("out");
    let o = oscillab(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(v["hessian"], "1");
    assert_eq!(v["factorization"]["N"], 0);
    assert_eq!(v["sharp_lp"][0]["p"]["num"], 2);
    assert_eq!(v["sharp_lp"][0]["decay"]["den"], 2);
}

#[test]
fn exit_codes_partition_failures() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cases: Vec<(Vec<String>, i32)> = vec![
        (vec!["analyze".into(), "--config".into(), write(d, "bad.json", r#"{"terms":[{"k":1,"#)], 1),
        (vec!["analyze".into(), "--config".into(), write(d, "key.json", r#"{"terms":[],"extra":1}"#)], 1),
        (vec!["sweep".into(), "--config".into(), write(d, "few.json", &serde_json::to_string(&sweep_config(4)).unwrap()), "--lambda-count".into(), "2".into()], 1),
        (vec!["sweep".into(), "--quadrant".into(), "5".into(), "--config".into(), "x.json".into()], 1),
        (vec!["bogus".into()], 1),
        (vec!["analyze".into(), "--config".into(), write(d, "inhom.json", r#"{"terms":[{"k":1,"l":0,"a":1},{"k":2,"l":1,"a":1}]}"#)], 2),
        (vec!["analyze".into(), "--config".into(), d.join("missing.json").to_str().unwrap().into()], 3),
    ];
    for (args, want) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = oscillab(&args);
        assert_eq!(code(&o), want, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // An output path that is a regular file cannot become a directory.
    let blocker = write(d, "blocker", "");
    let poly = write(d, "ok.json", r#"{"terms":[{"k":1,"l":1,"a":1}]}"#);
    assert_eq!(code(&oscillab(&["analyze", "--config", &poly, "--out", &blocker])), 3);
}

#[test]
fn malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"terms\": [\n");
    let o = oscillab(&["analyze", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn sweep_outputs_and_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.json", &serde_json::to_string(&sweep_config(7)).unwrap());
    let first = dir.path().join("first");
    let o = oscillab(&["sweep", "--config", &cfg, "--out", first.to_str().unwrap(), "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(first.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# oscillab "));
    assert_eq!(lines.next().unwrap(), "lambda,norm_lower,norm_upper,grid_mx,grid_my,wall_ms");
    assert_eq!(lines.count(), 7);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(first.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "consistent");
    assert!(std::fs::read_to_string(first.join("sweep.svg")).unwrap().contains("<svg"));

    // The report itself is accepted as a config and reproduces the run.
    let second = dir.path().join("second");
    let o = oscillab(&["sweep", "--config", first.join("sweep.json").to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv, std::fs::read_to_string(second.join("sweep.csv")).unwrap());
}

#[test]
fn flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.json", &serde_json::to_string(&sweep_config(7)).unwrap());
    let out = dir.path().join("out");
    let o = oscillab(&[
        "sweep", "--config", &cfg, "--out", out.to_str().unwrap(),
        "--lambda-min", "16", "--lambda-max", "128", "--lambda-count", "4", "--tolerance", "0.1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 4);
    assert_eq!(report["config"]["tolerance"], 0.1);
}

#[test]
fn counterexample_growth_is_half() {
    let dir = TempDir::new().unwrap();
    let cfg = CounterexampleConfig {
        a: 1.0,
        b: 0.5,
        n: 1,
        eps0: 0.1,
        ks: vec![16.0, 64.0, 256.0, 1024.0],
        control: false,
        rho_samples: 64,
    };
    let path = write(dir.path(), "c.json", &serde_json::to_string(&cfg).unwrap());
    let out = dir.path().join("out");
    let o = oscillab(&["counterexample", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("counterexample.json")).unwrap()).unwrap();
    let exponent = v["result"]["fit"]["slope"].as_f64().unwrap();
    assert!((exponent - 0.5).abs() < 0.1, "{v}");
}

#[test]
fn regime_violation_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = serde_json::json!({"a": 2.0, "b": 0.5, "n": 1, "eps0": 0.1, "ks": [16.0, 64.0, 256.0]});
    let path = write(dir.path(), "c.json", &cfg.to_string());
    let o = oscillab(&["counterexample", "--config", &path]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn selftest_passes_for_any_seed() {
    for seed in ["0", "17"] {
        let o = oscillab(&["selftest", "--seed", seed]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn norm_command_brackets_one_lambda() {
    let dir = TempDir::new().unwrap();
    let cfg = serde_json::json!({
        "phase": {"kind": "poly", "poly": {"terms": [{"k": 1, "l": 1, "a": 1}]}},
        "cutoff": serde_json::to_value(CutoffSpec::tensor_bump(BoxRegion::square(1.0))).unwrap(),
        "lambda": 64.0,
        "p": {"num": 3, "den": 2},
    });
    let path = write(dir.path(), "n.json", &cfg.to_string());
    let o = oscillab(&["norm", "--config", &path]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_of(&o);
    let lp = &v["result"]["lp"];
    let (lo, up) = (lp["lower"].as_f64().unwrap(), lp["upper"].as_f64().unwrap());
    assert!(0.0 < lo && lo <= up, "{v}");
}
