use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use adiabat_cli::{RunConfig, SCHEMA};

fn adiabat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiabat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn schema_parses_and_round_trips() {
    let cfg = RunConfig::parse(SCHEMA).unwrap();
    assert_eq!(cfg.scenario, "double_barrier");
    let again = RunConfig::parse(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.hash(), again.hash());
    assert_eq!(cfg.hash().len(), 64);
    // the documented defaults are the defaults
    assert_eq!(RunConfig::minimal("double_barrier"), cfg);
}

#[test]
fn schema_flag_prints_the_schema() {
    let o = adiabat(&["--schema"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), SCHEMA);
}

#[test]
fn unknown_key_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"double_barrier\"\nphase_budjet = 1\n");
    let o = adiabat(&["verify-identities", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("phase_budjet"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["scenario = \"nowhere\"", "scenario = \"double_barrier\"\neps_ladder = []", "scenario = \"double_barrier\"\nfd_step = -1.0"] {
        let cfg = write_config(dir.path(), "c.toml", body);
        let o = adiabat(&["sweep", "epsilon", "--dry-run", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
}

#[test]
fn listing_needs_no_config() {
    let o = adiabat(&[]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("double_barrier"));
    let o = adiabat(&["verify-identities", "--list"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for check in ["geometric_resolvent", "commutator_decomposition", "projector_algebra"] {
        assert!(out.contains(check));
    }
}

#[test]
fn verify_passes_on_the_control_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"spectral_control\"\nn = 100\n");
    let out = dir.path().join("run");
    let o = adiabat(&["verify-identities", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("identities.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_flags_a_theta_without_clearance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "scenario = \"double_barrier\"\n[identities]\ntheta_offset_cells = 0\nhs = false\n",
    );
    let out = dir.path().join("run");
    let o = adiabat(&["verify-identities", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL geometric_resolvent"), "{text}");
    assert!(text.contains("precondition violated"), "{text}");
}

#[test]
fn dry_run_plans_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"double_barrier\"\n");
    let out = dir.path().join("run");
    let o = adiabat(&["sweep", "epsilon", "--dry-run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches("job hbar").count(), 4, "{text}");
    assert!(text.contains("propagator steps"));
    assert!(!out.exists());
}

#[test]
fn epsilon_sweep_report_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"spectral_control\"\nn = 100\n");
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = adiabat(&["sweep", "epsilon", "--config", &cfg, "--out", run_s, "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let csv = fs::read_to_string(run.join("sweep_epsilon.csv")).unwrap();
    let rows = adiabat::verification_harness::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.delta <= 1e-12));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let entry = &manifest["sweeps"]["epsilon"];
    assert!(entry["all_pass"].as_bool().unwrap());
    assert!(entry["elapsed_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(entry["workers"], 2);

    // report twice: identical output
    assert_eq!(adiabat(&["report", run_s]).status.code(), Some(0));
    let first = fs::read_to_string(run.join("report.md")).unwrap();
    let plot = fs::read_to_string(run.join("plots/epsilon_distance.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert_eq!(adiabat(&["report", run_s]).status.code(), Some(0));
    assert_eq!(first, fs::read_to_string(run.join("report.md")).unwrap());
    assert!(first.contains("delta = 5."), "{first}");

    // rerun from the manifest reproduces the CSV byte for byte
    let again = dir.path().join("again");
    let manifest_path = run.join("manifest.json");
    let o = adiabat(&[
        "sweep",
        "epsilon",
        "--config",
        manifest_path.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv, fs::read_to_string(again.join("sweep_epsilon.csv")).unwrap());
}

#[test]
fn killed_run_leaves_no_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "scenario = \"double_barrier\"\neps_ladder = [0.01, 0.005]\n");
    let run = dir.path().join("run");
    fs::create_dir_all(&run).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_adiabat"))
        .args(["sweep", "epsilon", "--config", &cfg, "--out", run.to_str().unwrap()])
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(1500));
    assert!(child.try_wait().unwrap().is_none(), "sweep finished before it could be killed");
    child.kill().unwrap();
    child.wait().unwrap();
    let left: Vec<_> = fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(left.is_empty(), "{left:?}");
}
