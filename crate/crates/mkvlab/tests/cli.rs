use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mkvlab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn lemma_ine_default_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"schema_version": 1}"#);
    let out = dir.path().join("out");
    let o = run(&["verify-lemma-ine"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["kind"], "verify-lemma-ine");
    assert_eq!(r["checks"].as_array().unwrap().len(), 10);

    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(csv.starts_with("k,y,lhs,rhs\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 1 + 5 * 1000);

    let m: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 0);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["timestamp"].is_string());
    assert!(r.get("timestamp").is_none());
}

#[test]
fn malformed_json_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "bad.json", r#"{"schema_version": 1, "kind": "verify-yw", "#);
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(
        dir.path(),
        "unknown.json",
        r#"{"schema_version": 1, "kind": "verify-lemma-ine", "k_valuez": [1.0]}"#,
    );
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("k_valuez"), "{err}");

    let cfg = write(
        dir.path(),
        "nested.json",
        r#"{"schema_version": 1, "kind": "simulate-ckls",
            "params": {"alpha": 1, "delta": 1, "gamma": 0, "theta": 0.5},
            "init": {"dirac": 1}, "sim": {"n_particles": "many", "dt": 0.1, "horizon": 1}}"#,
    );
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sim.n_particles"), "{err}");
    assert!(!out.join("report.json").exists());
}

#[test]
fn kind_mismatch_and_missing_file_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["verify-lemma-ine"], &configs().join("yw.json"), &out);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["run"], &dir.path().join("nope.json"), &out);
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hypothesis_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["run"], &configs().join("hypothesis_violated.json"), &out);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["kind"], "HypothesisViolated");
    assert!(String::from_utf8_lossy(&o.stderr).contains("HypothesisViolated"));
}

#[test]
fn non_ergodic_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "kind": "verify-w1-contraction",
            "params": {"alpha": 1, "delta": 0.2, "gamma": 0.5, "theta": 0.5},
            "init_a": {"dirac": 1}, "init_b": {"dirac": 2},
            "sim": {"n_particles": 100, "dt": 0.01, "horizon": 1}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report(&out)["error"]["kind"], "NotErgodic");
}

#[test]
fn failed_check_exits_1() {
    // A Yamada-Watanabe audit at a negative tolerance cannot pass.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "kind": "verify-yw", "epsilons": [0.5], "points": 20, "tol": -1.0}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["status"], "fail");
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL audit"));
}

#[test]
fn harnack_with_equal_laws_has_jensen_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "kind": "verify-harnack-ckls", "seed": 3,
            "params": {"alpha": 1, "delta": 1, "gamma": 0.25, "theta": 0.75},
            "mu0": {"dirac": 1.5}, "nu0": {"dirac": 1.5}, "horizons": [0.5],
            "test_functions": [{"family": "exp_sin", "c": 1}, {"family": "constant", "c": 3}],
            "sim": {"n_particles": 2000, "dt": 0.01}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    let checks = r["checks"].as_array().unwrap();
    for c in checks {
        assert_eq!(c["details"]["addend"], 0.0);
        let gap = c["details"]["log_rhs"].as_f64().unwrap() - c["measured"].as_f64().unwrap();
        assert_eq!(c["margin"].as_f64().unwrap(), gap);
        assert!(gap >= 0.0);
    }
    assert_eq!(checks[1]["margin"], 0.0);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "kind": "simulate-ckls", "seed": 1,
            "params": {"alpha": 1, "delta": 1, "gamma": 0.5, "theta": 0.5},
            "init": {"samples": [0.5, 1.0, 1.5]}, "sim": {"n_particles": 500, "dt": 0.01, "horizon": 0.5}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["run"], &cfg, &a).status.code(), Some(0));
    assert_eq!(run(&["run", "--seed", "9"], &cfg, &b).status.code(), Some(0));
    assert_eq!(report(&a)["seed"], 1);
    assert_eq!(report(&b)["seed"], 9);
    assert_ne!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());
}

#[test]
fn csv_initial_law_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    write(&dir.path().join("data"), "init.csv", "x\n0.5\n1.0\n2.0\n");
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "kind": "stationary-ckls",
            "params": {"alpha": 1, "delta": 1, "gamma": 0.25, "theta": 0.5},
            "init": {"csv": "data/init.csv"}, "burn_in": 10, "sample_horizon": 2, "sample_every": 1,
            "sim": {"n_particles": 3000, "dt": 0.01}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["stationary-ckls"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn threads_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify-lemma-ine", "--config"])
        .arg(configs().join("lemma_ine.json"))
        .arg("--out")
        .arg(dir.path())
        .env("MKVLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["verify-lemma-ine", "--config"])
        .arg(configs().join("lemma_ine.json"))
        .arg("--out")
        .arg(dir.path())
        .env("MKVLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 2);
}

#[test]
fn emit_schema_prints_json() {
    let o = bin().arg("--emit-schema").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["oneOf"].as_array().unwrap().len(), 10);
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        mkvlab::load_config(&p, None).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
