use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabi-lattice"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().next().expect("stderr line");
    serde_json::from_str(line).expect("stderr is JSON")
}

#[test]
fn help_lists_subcommands() {
    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["bands", "evolve", "compare", "scenario", "plot"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn bands_writes_table_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands", "--v", "2", "--q-resolution", "21", "--out-dir", "."], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bands_bands.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("bands.json")).unwrap()).unwrap();
    assert!(meta.is_object());
}

#[test]
fn unknown_scenario_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "fig9"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn bad_config_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"kind":"dynamics","name":"x","bogus":1}"#).unwrap();
    let o = run(&["scenario", "--config", "bad.json"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"], "config");
}

#[test]
fn missing_argument_exits_with_usage_json() {
    let o = bin().arg("evolve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn leaky_periodic_start_fails_with_leakage() {
    // w0 = 1 makes the trap ground state wider than the Brillouin zone
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["evolve", "--model", "periodic", "--g-over-w0", "2", "--wq-over-w0", "0.5", "--t-max", "1", "--out-dir", "."],
        dir.path(),
    );
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"], "leakage");
}

#[test]
fn evolve_compare_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["full", "periodic", "rabi"] {
        let o = run(
            &[
                "evolve", "--model", model, "--g-over-w0", "5", "--wq-over-w0", "0.5", "--t-max", "2",
                "--n-records", "20", "--name", model, "--out-dir", ".",
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{model}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(format!("{model}_{model}.csv")).exists());
    }

    let o = run(&["compare", "full_full.csv", "periodic_periodic.csv", "--out", "cmp.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let q = report["deviations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["observable"] == "q")
        .unwrap();
    assert!(q["max_abs"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("cmp.json").exists());

    let o = run(&["plot", "rabi_rabi.csv", "--out-dir", "plots"], dir.path());
    assert!(o.status.success());
    let svg = std::fs::read_to_string(dir.path().join("plots/rabi_rabi_q.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn compare_rejects_mismatched_times() {
    let dir = tempfile::tempdir().unwrap();
    for (name, records) in [("a", "10"), ("b", "20")] {
        let o = run(
            &[
                "evolve", "--model", "rabi", "--g-over-w0", "2", "--wq-over-w0", "0", "--t-max", "1",
                "--n-records", records, "--name", name, "--out-dir", ".",
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    let o = run(&["compare", "a_rabi.csv", "b_rabi.csv"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"], "usage");
}
