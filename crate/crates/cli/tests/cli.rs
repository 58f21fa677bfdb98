use circlesync::GridMeasure;
use serde_json::{json, Value};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const SQRT2_M1: f64 = std::f64::consts::SQRT_2 - 1.0;

fn rotations() -> Value {
    json!({"maps": [
        {"type": "rotation", "angle": SQRT2_M1},
        {"type": "rotation", "angle": (5f64.sqrt() - 1.0) / 2.0},
    ]})
}

fn pair() -> Value {
    json!({"maps": [
        {"type": "rotation", "angle": SQRT2_M1},
        {"type": "projective", "matrix": [2.0, 0.0, 0.0, 0.5]},
    ], "probs": [0.5, 0.5]})
}

fn doubled_pair() -> Value {
    json!({"maps": [
        {"type": "klift", "k": 2, "base": {"type": "rotation", "angle": SQRT2_M1}},
        {"type": "klift", "k": 2, "base": {"type": "projective", "matrix": [2.0, 0.0, 0.0, 0.5]}},
    ]})
}

/// Writes `config` to a fresh directory and runs one subcommand there.
fn run(dir: &Path, sub: &str, config: &Value, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_circlesync"))
        .arg(sub)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_quarter_rotation() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "ifs": {"maps": [{"type": "rotation", "angle": 0.25}]},
        "simulate": {"x": 0.0, "n": 4},
    });
    let o = run(dir.path(), "simulate", &config, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/trajectory.jsonl")).unwrap();
    let xs: Vec<f64> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["x"].as_f64().unwrap())
        .collect();
    assert_eq!(xs.len(), 5);
    for (x, want) in xs.iter().zip([0.0, 0.25, 0.5, 0.75, 0.0]) {
        assert!((x - want).abs() < 1e-12, "{xs:?}");
    }
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["symbol"].is_null());
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["config"]["simulate"]["n"], 4);
}

#[test]
fn invariant_of_rotations_is_lebesgue_and_reimports() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "invariant", &json!({"ifs": rotations()}), &["--grid", "256"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/measure.csv")).unwrap();
    let mu = GridMeasure::read_csv(text.as_bytes()).unwrap();
    assert_eq!(mu.grid_size(), 256);
    for (i, c) in mu.cdf().iter().enumerate() {
        assert!((c - i as f64 / 256.0).abs() < 1e-6);
    }
}

#[test]
fn classify_labels_reference_systems() {
    let cases = [
        (rotations(), "invariance", None),
        (pair(), "synchronization", None),
        (doubled_pair(), "factorization", Some(2)),
    ];
    for (ifs, label, k) in cases {
        let dir = TempDir::new().unwrap();
        let config = json!({"ifs": ifs, "sync": {"seeds": 50}});
        let o = run(dir.path(), "classify", &config, &["--grid", "1024"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let out = dir.path().join("out");
        let t = read_json(&out.join("trichotomy.json"));
        assert_eq!(t["label"], label);
        if let Some(k) = k {
            assert_eq!(t["k"], k);
        }
        let curve = fs::read_to_string(out.join("defect_curve.csv")).unwrap();
        assert!(curve.starts_with("s,defect\n"));
        let samples = fs::read_to_string(out.join("sync_samples.csv")).unwrap();
        assert_eq!(samples.lines().count(), 51);
    }
}

#[test]
fn fibers_of_rotations_report_no_contraction() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "fibers", &json!({"ifs": rotations()}), &["--grid", "256"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["status"], "error");
    assert_eq!(summary["error"], "NoContraction");
}

#[test]
fn fibers_of_doubled_pair() {
    let dir = TempDir::new().unwrap();
    let config = json!({"ifs": doubled_pair(), "fibers": {"seeds": 20, "samples": 50}});
    let o = run(dir.path(), "fibers", &config, &["--grid", "1024"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let lines = fs::read_to_string(out.join("fibers.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    for l in lines.lines() {
        let f: Value = serde_json::from_str(l).unwrap();
        assert_eq!(f["atoms"].as_array().unwrap().len(), 2);
    }
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["result"]["k"], 2);
    assert_eq!(summary["result"]["low_confidence"], true);
    let mu = GridMeasure::read_csv(fs::read_to_string(out.join("mu_minus.csv")).unwrap().as_bytes()).unwrap();
    assert_eq!(mu.grid_size(), 1024);
}

#[test]
fn preserved_and_sync_reports() {
    let dir = TempDir::new().unwrap();
    let config = json!({"ifs": doubled_pair(), "sync": {"seeds": 40, "horizon": 1500}});
    let o = run(dir.path(), "preserved", &config, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = read_json(&dir.path().join("out/preserved.json"));
    assert_eq!(p["k"], 2);
    assert_eq!(p["oplus_closed"], true);

    let o = run(dir.path(), "sync", &config, &["--seed", "17"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(s["seed"], 17);
    assert_eq!(s["result"]["seeds_used"], 40);
    let unassigned = s["result"]["unassigned"].as_f64().unwrap();
    assert!(unassigned < 1e-12, "{unassigned}");
}

#[test]
fn runs_are_byte_identical() {
    let config = json!({"ifs": pair(), "metric": "rho", "sync": {"seeds": 30, "horizon": 800}});
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
        .map(|_| {
            let dir = TempDir::new().unwrap();
            let o = run(dir.path(), "sync", &config, &["--grid", "1024"]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            let out = dir.path().join("out");
            // the out path differs between runs, so compare the payload files
            let mut summary = read_json(&out.join("summary.json"));
            summary["config"]["out"] = Value::Null;
            (
                fs::read(out.join("sync_samples.csv")).unwrap(),
                serde_json::to_vec(&summary).unwrap(),
            )
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), "invariant", &json!({"ifs": rotations(), "grid": 64}), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    let o = run(dir.path(), "invariant", &json!({"ifs": rotations()}), &["--grid", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid_size"));

    let o = Command::new(env!("CARGO_BIN_EXE_circlesync")).arg("simulate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_circlesync")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_circlesync")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}
