use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use slgate::addressing::read_csv;
use slgate::mergeopt::{read_pulse, read_sweep_csv};

fn slgate(args: &[&str], dir: &Path, workers: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slgate"));
    c.args(args).current_dir(dir).env("RUST_LOG", "warn");
    match workers {
        Some(w) => c.env("SLGATE_WORKERS", w),
        None => c.env_remove("SLGATE_WORKERS"),
    };
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

const MERGE: &str = "[merge]\ntau_us = [250.0]\nobjective = \"all\"\nknots = 4\ngrid_points = 512\ndt = 0.01\nmax_evals = 30\nrestarts = 0\n";

#[test]
fn validate_prints_derived_quantities() {
    let d = tempfile::tempdir().unwrap();
    let o = slgate(&["validate"], d.path(), None);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("851.2000 nm"), "{s}");
    assert!(s.contains("2128.0000 nm"), "{s}");
    assert!(s.contains("g_1D"));
    assert!(s.contains("2.0278 kHz"));
}

#[test]
fn validate_reports_every_problem() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("bad.toml"),
        "species = \"missing/rb.toml\"\n[superlattice]\nlambda2_nm = 700.0\n[addressing]\np_t = 0.0\n",
    )
    .unwrap();
    let o = slgate(&["-c", "bad.toml", "validate"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["kind"], "config");
    let problems: Vec<String> = e["problems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.to_string())
        .collect();
    assert!(problems.len() >= 3, "{problems:?}");
    assert!(problems.iter().any(|p| p.contains("missing/rb.toml")));
}

#[test]
fn blue_secondary_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.toml"), "[superlattice]\nlambda2_nm = 700.0\n").unwrap();
    let o = slgate(&["-c", "c.toml", "validate"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["problems"].to_string().contains("red-detuned"));
}

#[test]
fn unknown_keys_and_bad_workers_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.toml"), "[merge]\nnot_a_key = 1\n").unwrap();
    let o = slgate(&["-c", "c.toml", "validate"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let o = slgate(&["validate"], d.path(), Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("SLGATE_WORKERS"));
}

#[test]
fn single_cell_scan() {
    let d = tempfile::tempdir().unwrap();
    let o = slgate(
        &[
            "-o",
            "out",
            "scan",
            "--points",
            "1",
            "1",
            "--lambda2-nm",
            "851.2",
            "851.2",
            "--a",
            "0.28",
            "0.28",
        ],
        d.path(),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("out/scan.csv")).unwrap();
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    let det = rows[0][2].unwrap();
    assert!((det - 0.016).abs() < 0.0024, "{det}");
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/scan_summary.json")).unwrap()).unwrap();
    let hash = summary["config_hash"].as_str().unwrap();
    assert!(text.contains(&format!("# config_hash {hash}")));
    assert_eq!(summary["version"], 1);
}

#[test]
fn empty_scan_range_fails() {
    let d = tempfile::tempdir().unwrap();
    let o = slgate(&["scan", "--points", "0", "10"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let o = slgate(&["scan", "--lambda2-nm", "900", "850"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_is_independent_of_worker_count() {
    let d = tempfile::tempdir().unwrap();
    let args = ["-o", "w", "scan", "--points", "6", "5"];
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let o = slgate(&args, d.path(), Some(w));
        assert!(o.status.success());
        outputs.push((
            fs::read(d.path().join("w/scan.csv")).unwrap(),
            fs::read(d.path().join("w/scan_summary.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn merge_then_replay_reproduces_the_report() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("m.toml"), MERGE).unwrap();
    let o = slgate(
        &["-c", "m.toml", "-o", "run", "merge", "--trajectories"],
        d.path(),
        Some("2"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = d.path().join("run");
    let report: Value = serde_json::from_str(&fs::read_to_string(run.join("merge_report.json")).unwrap()).unwrap();
    let hash = report["config_hash"].as_str().unwrap().to_string();
    let point = &report["points"][0];
    let r = &point["report"];
    assert_eq!(r["config_hash"], hash.as_str());
    let fe = r["f_error"].as_f64().unwrap();
    let fa = r["f_all"].as_f64().unwrap();
    let ft = r["f_target"].as_f64().unwrap();
    assert!(fe <= fa && fa <= ft);

    let pulse_text = fs::read_to_string(run.join("pulse_250.0us.txt")).unwrap();
    let pulse = read_pulse(pulse_text.as_bytes()).unwrap();
    assert_eq!(pulse.config_hash, hash);
    let sweep = fs::read_to_string(run.join("sweep.csv")).unwrap();
    assert!(sweep.contains(&hash));
    let rows = read_sweep_csv(sweep.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].f_all, fa);
    let traj = fs::read_to_string(run.join("trajectory_250.0us.txt")).unwrap();
    assert!(traj.starts_with("slgate-trajectory 1"));

    let o = slgate(
        &["-c", "m.toml", "-o", "run", "replay", "run/pulse_250.0us.txt"],
        d.path(),
        Some("1"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replay: Value = serde_json::from_str(&fs::read_to_string(run.join("replay_250.0us.json")).unwrap()).unwrap();
    assert_eq!(replay["config_hash"], hash.as_str());
    assert_eq!(replay["pulse_config_hash"], hash.as_str());
    let rr = &replay["report"];
    for key in ["f_target", "f_all", "f_error", "t_swap", "p_sc_swap"] {
        let a = r[key].as_f64().unwrap();
        let b = rr[key].as_f64().unwrap();
        assert!((a - b).abs() <= 1e-10, "{key}: {a} vs {b}");
    }
}

#[test]
fn zero_error_box_in_report() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{MERGE}[merge.error_box]\namp_frac = 0.0\nphase_offset_pi = 0.0\ngrid = 1\n");
    fs::write(d.path().join("m.toml"), cfg).unwrap();
    let o = slgate(
        &["-c", "m.toml", "-o", "z", "merge", "--max-evals", "15"],
        d.path(),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("z/merge_report.json")).unwrap()).unwrap();
    let r = &report["points"][0]["report"];
    assert_eq!(r["f_error"], r["f_all"]);
}

#[test]
fn replay_of_missing_pulse_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = slgate(&["replay", "nowhere.txt"], d.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("nowhere.txt"));
}
