use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qclimit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qclimit")).current_dir(dir).args(args).output().expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn coherent_nelson_converges_at_solver_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qclimit(tmp.path(), &["converge", "--out", "a"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("a/converge.json")).unwrap()).unwrap();
    assert_eq!(summary["data"]["verdict"], "PASS");
    for op in ["potential", "resolvent_strong"] {
        let rep: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join(format!("a/converge_{op}.json"))).unwrap()).unwrap();
        let floors = &rep["data"]["floors"];
        for row in rep["data"]["rows"].as_array().unwrap() {
            let floor = floors[row["metric"].as_str().unwrap()].as_f64().unwrap();
            assert!(row["value"].as_f64().unwrap() <= floor, "{row}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = qclimit(tmp.path(), &["converge", "--seed", "11", "--threads", "2", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert!(a.len() > 5);
    assert_eq!(a, b);
    let other = qclimit(tmp.path(), &["converge", "--seed", "12", "--out", "c"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(fs::read(tmp.path().join("a/converge_potential.csv")).unwrap(), fs::read(tmp.path().join("c/converge_potential.csv")).unwrap());
}

#[test]
fn every_csv_row_carries_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(qclimit(tmp.path(), &["spectrum", "--out", "s"]).status.code(), Some(0));
    let run: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("s/run.json")).unwrap()).unwrap();
    let hash = run["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for (name, bytes) in files(&tmp.path().join("s")) {
        let text = String::from_utf8_lossy(&bytes);
        if name.ends_with(".csv") {
            for line in text.lines().skip(1) {
                assert!(line.starts_with(&hash), "{name}: {line}");
            }
        } else if name.ends_with(".dat") {
            assert!(text.lines().next().unwrap().contains(&hash));
        } else if name.ends_with(".json") {
            assert!(text.contains(&hash), "{name}");
        }
    }
}

#[test]
fn chi_equals_omega_fails_the_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "chi.toml", "preset = \"chi-equals-omega\"\nseed = 1\n");
    let o = qclimit(tmp.path(), &["check-assumptions", "--config", &c, "--out", "x"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("A_chi"));
    let csv = fs::read_to_string(tmp.path().join("x/assumptions.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains("A_chi") && l.ends_with("false")));
    // only --strict makes the audit fatal for other commands
    let o = qclimit(tmp.path(), &["potentials", "--config", &c, "--out", "y"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: assumption audit: A_chi"));
    let o = qclimit(tmp.path(), &["potentials", "--strict", "--config", &c, "--out", "z"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn default_audit_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qclimit(tmp.path(), &["check-assumptions", "--out", "x"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lorentz_suite_has_weak_norm_row() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qclimit(tmp.path(), &["lorentz-suite", "--out", "l"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("l/lorentz_suite.csv")).unwrap();
    let row = csv.lines().find(|l| l.contains("weak_norm_3_inf")).unwrap();
    let v: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    let exact = 3f64.powf(2.0 / 3.0) * (4.0 * std::f64::consts::PI).powf(1.0 / 3.0);
    assert!((v - exact).abs() / exact < 0.05, "{v}");
    assert!(csv.lines().filter(|l| l.contains("holder_")).count() >= 6);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "noseed.toml", "preset = \"coherent-nelson\"\n");
    let o = qclimit(tmp.path(), &["converge", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let c = config(tmp.path(), "bad.toml", "preset = \"nope\"\nseed = 1\n");
    assert_eq!(qclimit(tmp.path(), &["converge", "--config", &c]).status.code(), Some(2));
    // chi = 1 has no cutoff to move
    assert_eq!(qclimit(tmp.path(), &["uv-sweep", "--out", "u"]).status.code(), Some(2));
}

#[test]
fn includes_layer_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("inc")).unwrap();
    config(tmp.path(), "inc/grid.toml", "[grid]\nn = 32\n");
    let c = config(tmp.path(), "main.toml", "preset = \"coherent-nelson\"\ninclude = [\"inc/grid.toml\"]\nseed = 4\n\n[spectrum]\ncount = 3\n");
    let o = qclimit(tmp.path(), &["spectrum", "--config", &c, "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = fs::read_to_string(tmp.path().join("s/config.resolved.toml")).unwrap();
    assert!(resolved.contains("n = 32") && resolved.contains("seed = 4"));
    let csv = fs::read_to_string(tmp.path().join("s/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",limit,")).count(), 3);
}

#[test]
fn uv_schedules_agree_on_the_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "uv.toml", "preset = \"uv-nelson\"\nseed = 2\n");
    let o = qclimit(tmp.path(), &["uv-sweep", "--config", &c, "--out", "u"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(tmp.path().join("u/verdicts.csv")).unwrap().contains("schedule_independence,true"));
}

#[test]
fn unresolved_schedules_fail_the_verdict() {
    // a broad field profile: eps^{-1/4} still truncates it at the end of the sweep
    let tmp = tempfile::tempdir().unwrap();
    let body = "preset = \"uv-nelson\"\nseed = 2\n\n[family]\nkind = \"excited_coherent\"\n\n[[family.z0]]\namplitude = [0.8, 0.2]\ncenter = [0.0, 0.0, 0.0]\nwidth = 3.0\n\n[[family.g]]\namplitude = [0.4, -0.3]\ncenter = [0.0, 0.0, 0.0]\nwidth = 3.0\n";
    let c = config(tmp.path(), "wide.toml", body);
    let o = qclimit(tmp.path(), &["uv-sweep", "--config", &c, "--out", "u"]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("u/run.json")).unwrap()).unwrap();
    assert_eq!(run["data"]["exit_code"], 5);
}
