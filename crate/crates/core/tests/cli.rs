use std::process::{Command, Output};

fn bellcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellcheck"))
        .args(args)
        .env_remove("BELLCHECK_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn joint_prints_full_precision_cells() {
    let o = bellcheck(&["joint", "--model", "hall", "--a", "0", "--b", "0.39269908169872414"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    // ¼(1 + cos π/4)
    assert!(out.contains("4.2677669529663687e-1"), "{out}");
    assert!(out.contains("differs_from_qm = false"), "{out}");
}

#[test]
fn degrees_flag() {
    let o = bellcheck(&["chsh", "--model", "qm", "--deg", "--a", "0", "--a-prime", "45", "--b", "22.5", "--b-prime", "67.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("abs_s = 2.8284271247461"), "{}", stdout(&o));
}

#[test]
fn unknown_model_is_a_usage_error() {
    let o = bellcheck(&["joint", "--model", "nonsense", "--a", "0", "--b", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(bellcheck(&["joint", "--model", "qm"]).status.code(), Some(2));
    assert_eq!(bellcheck(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bellcheck(&["scan", "--model", "qm", "--grid-n", "4"]).status.code(), Some(2));
}

#[test]
fn scan_checks_against_the_model_bound() {
    let o = bellcheck(&["scan", "--model", "baseline", "--grid-n", "8", "--refine", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let o = bellcheck(&["joint", "--model", "baseline", "--a", "0", "--b", "0.39269908169872414"]);
    assert!(stdout(&o).contains("differs_from_qm = true"));
}

#[test]
fn signaling_model_fails_nosignal() {
    let o = bellcheck(&["nosignal", "--model", "signaling", "--coupling", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(bellcheck(&["nosignal", "--model", "hall"]).status.code(), Some(0));
}

#[test]
fn curve_is_csv_with_one_column_per_model() {
    let o = bellcheck(&["curve", "--models", "qm,hall,baseline", "--steps", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "delta,qm,hall,baseline");
    assert_eq!(lines.len(), 10);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - (2.0 * v[0]).cos()).abs() < 1e-12);
        assert!((v[1] - v[2]).abs() < 1e-10);
        assert!((v[3] - (1.0 - 4.0 * v[0] / std::f64::consts::PI)).abs() < 1e-12);
    }
}

#[test]
fn emitted_manifest_reproduces_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let o = bellcheck(&[
        "sample", "--model", "simplistic", "--a", "0.1", "--b", "1.2", "--n", "50000", "--seed", "7",
        "--emit-manifest", manifest.to_str().unwrap(), "--record", first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = bellcheck(&["run", "--manifest", manifest.to_str().unwrap(), "--record", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_bellcheck"))
            .args(["sample", "--model", "hall", "--a", "0", "--b", "1", "--n", "20000"])
            .env("BELLCHECK_SEED", seed)
            .output()
            .unwrap();
        stdout(&o)
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
}

#[test]
fn trial_log_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trials.csv");
    let o = bellcheck(&["sample", "--model", "hall", "--a", "0", "--b", "0.5", "--n", "1000", "--log", log.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&log).unwrap();
    let rows = bellcheck::montecarlo::read_trial_log(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.lambda.is_some()));
}

#[test]
fn malformed_manifest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"model": {"name": "qm"}, "task": "joint", "bogus": 1}"#).unwrap();
    assert_eq!(bellcheck(&["run", "--manifest", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_with_injected_signaling_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verify.json");
    std::fs::write(
        &path,
        r#"{"model": {"name": "all"}, "task": "verify",
            "options": {"battery": {"mc_trials": 20000, "mc_pairs": 2, "equivalence_grid": 8, "scan_refine": 5}},
            "tolerances": {"monte_carlo_sigma": 4.5}}"#,
    )
    .unwrap();
    let ok = bellcheck(&["verify", "--manifest", path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let bad = bellcheck(&["verify", "--manifest", path.to_str().unwrap(), "--inject-signaling"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL no_signaling/signaling"));
}
