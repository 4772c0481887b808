use std::path::Path;
use std::process::{Command, Output};

use isoclass::container::Container;

fn bin(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoclass")).args(args).arg("--config").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const TRANSPORT: &str = r#"{
  "experiment": "transport-check",
  "symbol": "SYMBOL",
  "order": 1,
  "splitting": {"k": 1, "l": 1},
  "grid": {"window": {"flat": 5.0, "edge": 7.0}},
  "stack": {"terms": [[{"hermite": [0]}], [{"hermite": [1], "re": 0.5}]]},
  "schedule": [3.2e-3, 1.6e-3, 8e-4, 4e-4],
  "t_star": [0.5],
  "thresholds": {"slope_min": 0.4, "residual_max": RESMAX}
}"#;

fn transport(symbol: &str, residual_max: &str) -> String {
    TRANSPORT.replace("SYMBOL", symbol).replace("RESMAX", residual_max)
}

#[test]
fn pass_exits_zero_with_csv_and_timestamps() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "t.json", &transport("xi_2 + x_2", "0.05"));
    let out = d.path().join("out");
    let o = bin(&["transport-check"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS residual slope"), "{stdout}");
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("transport-check.json")).unwrap()).unwrap();
    assert_eq!(j["pass"], true);
    assert!(j["wall_clock_seconds"].is_number());
    assert!(j["timestamp_unix"].is_number());
    assert!((j["fits"]["residual_slope"].as_f64().unwrap() - 0.5).abs() < 0.1);
    let csv = std::fs::read_to_string(out.join("transport-check.residuals.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("hbar,residual\n"));
}

#[test]
fn reruns_are_byte_identical_without_timestamps() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "t.json", &transport("xi_2 + x_2", "0.05"));
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for o in [&a, &b] {
        assert_eq!(bin(&["transport-check", "--no-timestamps"], &cfg, o).status.code(), Some(0));
    }
    let ra = std::fs::read(a.join("transport-check.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("transport-check.json")).unwrap());
    assert!(!String::from_utf8_lossy(&ra).contains("wall_clock"));
}

#[test]
fn measured_failure_exits_one_and_still_writes_report() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "t.json", &transport("xi_2 + x_2", "1e-6"));
    let out = d.path().join("out");
    let o = bin(&["transport-check", "--no-timestamps"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("transport-check.json")).unwrap()).unwrap();
    assert_eq!(j["pass"], false);
    assert_eq!(j["criteria"][1]["pass"], false);
    assert_eq!(j["criteria"][1]["comparison"], "<=");
}

#[test]
fn harness_error_is_reported_as_failure() {
    let d = tempfile::tempdir().unwrap();
    // A box far too small for the coherent state: mass reaches the boundary.
    let cfg = write(
        d.path(),
        "p.json",
        r#"{"experiment": "propagate", "potential": "x_1^2", "z0": {"x": [1.0], "xi": [0.0]}, "time": 1.0,
            "pde_dt": 1e-3, "grid": {"half_width": 1.0, "size": 256}, "hbars": [1e-2]}"#,
    );
    let out = d.path().join("out");
    let o = bin(&["propagate", "--no-timestamps"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("propagate.json")).unwrap()).unwrap();
    assert!(j["error"].is_string(), "{j}");
    assert_eq!(j["pass"], false);
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let malformed = write(d.path(), "m.json", &transport("xi_^", "0.05"));
    let o = bin(&["transport-check"], &malformed, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("transport-check.json").exists());

    let unknown = write(d.path(), "u.json", r#"{"experiment": "metaplectic-check", "seed": 1, "samples": 1, "sed": 2}"#);
    assert_eq!(bin(&["metaplectic-check"], &unknown, &out).status.code(), Some(2));

    let mismatch = write(d.path(), "x.json", r#"{"experiment": "metaplectic-check", "seed": 1, "samples": 1}"#);
    let o = bin(&["quasimode"], &mismatch, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("metaplectic-check"));

    assert_eq!(bin(&["norm-check"], &d.path().join("absent.json"), &out).status.code(), Some(2));

    let bad_schedule = write(d.path(), "s.json", &transport("xi_2 + x_2", "0.05").replace("8e-4, 4e-4", "8e-4, 3e-4"));
    assert_eq!(bin(&["transport-check"], &bad_schedule, &out).status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_isoclass")).arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metaplectic_records_seed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "m.json", r#"{"experiment": "metaplectic-check", "seed": 77, "samples": 2}"#);
    let out = d.path().join("out");
    assert_eq!(bin(&["metaplectic-check", "--no-timestamps"], &cfg, &out).status.code(), Some(0));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metaplectic-check.json")).unwrap()).unwrap();
    assert_eq!(j["seed"], 77);
    assert_eq!(j["config"]["seed"], 77);
}

#[test]
fn husimi_dump_writes_containers() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "h.json",
        r#"{"experiment": "husimi-dump", "state": {"kind": "coherent", "z0": {"x": [0.3], "xi": [0.2]}},
            "grid": {"half_width": 2.0, "size": 256}, "hbar": 0.02, "x_stride": 4, "xi_stride": 2}"#,
    );
    let out = d.path().join("out");
    assert_eq!(bin(&["husimi-dump", "--no-timestamps"], &cfg, &out).status.code(), Some(0));
    let h = Container::read(&out.join("husimi-dump.husimi.bin")).unwrap();
    assert_eq!(h.sizes, vec![64, 128]);
    assert_eq!(h.hbar, 0.02);
    let (mut best, mut at) = (f64::NEG_INFINITY, 0);
    for (j, v) in h.values.iter().enumerate() {
        assert_eq!(v.im, 0.0);
        if v.re > best {
            best = v.re;
            at = j;
        }
    }
    let node = |axis: usize, m: usize| -h.half_widths[axis] + m as f64 * 2.0 * h.half_widths[axis] / h.sizes[axis] as f64;
    let (x, xi) = (node(0, at / 128), node(1, at % 128));
    assert!((x - 0.3).abs() < 0.1 && (xi - 0.2).abs() < 0.1, "peak at ({x}, {xi})");
    let f = Container::read(&out.join("husimi-dump.field.bin")).unwrap().to_field().unwrap();
    assert!((f.norm() - 1.0).abs() < 1e-6);
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("husimi-dump.json")).unwrap()).unwrap();
    assert_eq!(j["artifacts"], serde_json::json!(["husimi-dump.husimi.bin", "husimi-dump.field.bin"]));
}

#[test]
fn config_out_dir_is_used_without_flag() {
    let d = tempfile::tempdir().unwrap();
    let target = d.path().join("from-config");
    let body = format!(r#"{{"experiment": "metaplectic-check", "seed": 5, "samples": 1, "out_dir": {:?}}}"#, target.to_str().unwrap());
    let cfg = write(d.path(), "m.json", &body);
    let o = Command::new(env!("CARGO_BIN_EXE_isoclass")).args(["metaplectic-check", "--no-timestamps", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("metaplectic-check.json").is_file());
}

#[test]
fn metaplectic_matrices_are_factored_into_tagged_words() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let body = r#"{"experiment": "metaplectic-check", "seed": 1, "samples": 1,
        "matrices": [[[0.0, 1.0], [-1.0, 0.0]], [[2.0, 0.0], [0.0, 0.5]]]}"#;
    let cfg = write(d.path(), "m.json", body);
    let o = bin(&["metaplectic-check", "--no-timestamps"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metaplectic-check.json")).unwrap()).unwrap();
    let words = j["words"].as_array().unwrap();
    assert_eq!(words.len(), 2);
    let types = ["dilation", "shear", "fourier"];
    for w in words {
        for g in w.as_array().unwrap() {
            assert!(types.contains(&g["type"].as_str().unwrap()), "{g}");
        }
    }
    assert!(out.join("metaplectic-check.matrices.csv").is_file());

    let bad = write(d.path(), "b.json", r#"{"experiment": "metaplectic-check", "seed": 1, "samples": 1, "matrices": [[[1.0, 1.0], [1.0, 1.0]]]}"#);
    assert_eq!(bin(&["metaplectic-check"], &bad, &out).status.code(), Some(2));
    let ragged = write(d.path(), "r.json", r#"{"experiment": "metaplectic-check", "seed": 1, "samples": 1, "matrices": [[[1.0, 0.0], [0.0]]]}"#);
    assert_eq!(bin(&["metaplectic-check"], &ragged, &out).status.code(), Some(2));
}
