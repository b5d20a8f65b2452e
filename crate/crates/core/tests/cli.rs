use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use photon_packets::io::parse_protocol;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photon-packets"))
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    bin().arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(args).output().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn classify_prints_the_label() {
    let out = bin().args(["classify", "--f", "5", "--delta", "0.2"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "C\n");
}

#[test]
fn classify_grid_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["classify", "--grid", "5:15:2", "0.1:0.2:2", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "f,delta,class,d0,d1,d2");
    let labels: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(labels, ["B", "C", "D", "D"]);
}

#[test]
fn resonant_reduced_orbit_is_a_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "[system]\ndelta = 0.0\n[drive]\nf = 5\n[reduced]\nbranch = \"1\"\nt_end = 70\n", &["reduced"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = rows(&dir.path().join("out/branch1.csv"));
    assert!(data.len() > 100);
    for r in data {
        let r_to_center = ((r[1] - 5.0).powi(2) + r[2].powi(2)).sqrt();
        assert!((r_to_center - 5.0).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn zero_duration_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[system]\ndelta = 0.1\n[drive]\nf = 5\n[run]\nt_end = 0\n[analysis]\nspectrum = true\nwigner_times = [0]\n";
    let out = run(dir.path(), cfg, &["simulate"]);
    assert!(out.status.success());
    for name in ["observables.csv", "distribution.csv", "spectrum.csv", "wigner.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        assert_eq!(text.lines().count(), 1, "{name}");
    }
}

#[test]
fn ground_state_run_splits_into_two_packets_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[system]\ndelta = 0.1\n[drive]\nf = 5\n[run]\nt_end = 40\nsample_stride = 0.5\ntail_threshold = 1e-6\n[analysis]\npacket_times = [40]\nwigner_times = [40]\nwigner_points = 21\n";
    let out = run(dir.path(), cfg, &["simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let packets = fs::read_to_string(dir.path().join("out/packets.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(packets.lines().next().unwrap()).unwrap();
    assert_eq!(record["packets"].as_array().unwrap().len(), 2);
    let first = fs::read(dir.path().join("out/distribution.csv")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/run.json")).unwrap()).unwrap();
    assert!(summary["max_norm_drift"].as_f64().unwrap() < 1e-8);

    let again = run(dir.path(), cfg, &["simulate"]);
    assert!(again.status.success());
    assert_eq!(first, fs::read(dir.path().join("out/distribution.csv")).unwrap());

    let spec = bin()
        .arg("spectrum")
        .arg(dir.path().join("out/observables.csv"))
        .arg("--out")
        .arg(dir.path().join("spec"))
        .output()
        .unwrap();
    assert!(spec.status.success());
    let s = rows(&dir.path().join("spec/spectrum.csv"));
    assert_eq!(s.len(), 81 / 2 + 1);
}

#[test]
fn protocol_synthesis_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[system]\ndelta = 0.1\n[synth]\nstrategy = \"class-D-return\"\nn_packets = 4\nf_levels = [5, 15]\n";
    let out = run(dir.path(), cfg, &["protocol", "synth"]);
    assert!(out.status.success());
    let p = parse_protocol(&fs::read_to_string(dir.path().join("out/protocol.txt")).unwrap()).unwrap();
    let taus: Vec<f64> = p.step_times().collect();
    for (t, want) in taus.iter().zip([10.5, 49.4, 58.2]) {
        assert!((t - want).abs() < 0.5, "{taus:?}");
    }

    let v = dir.path().join("validate.toml");
    fs::write(&v, "[system]\ndelta = 0.1\n[validate]\nt_end = 70\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&v)
        .arg("--out")
        .arg(dir.path().join("val"))
        .args(["protocol", "validate", "--protocol"])
        .arg(dir.path().join("out/protocol.txt"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("val/validation.json")).unwrap()).unwrap();
    assert_eq!(report["steps"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "[system]\ndelta = 0.1\ncolour = 1\n", &["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");

    let out = run(dir.path(), "[system]\ndelta = 0.1\n[drive]\nf = 15\n[run]\nt_end = 5\n", &["--nmax", "4", "simulate"]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "under_truncated");

    let cfg = "[system]\ndelta = 0.1\n[synth]\nstrategy = \"class-D-return\"\nn_packets = 4\nf_levels = [5, 3]\n";
    let out = run(dir.path(), cfg, &["protocol", "synth"]);
    assert_eq!(out.status.code(), Some(4));
}
