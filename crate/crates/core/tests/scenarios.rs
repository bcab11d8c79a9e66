use rabi_lattice::io::{load_series_csv, read_table};
use rabi_lattice::scenario::{
    builtin, parse_config, run_all, run_dynamics, DynamicsConfig, Model, Outcome, QubitSpec, Scenario,
};

fn small(name: &str) -> DynamicsConfig {
    let mut c = DynamicsConfig::new(name, 5.0, 0.5);
    c.t_max = Some(3.0);
    c.n_records = Some(30);
    c.cutoff = 200;
    c
}

#[test]
fn files_round_trip_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("rt");
    c.snapshot_every = Some(10);
    let first = run_dynamics(&c, Some(dir.path())).unwrap();
    assert!(first.failures.is_empty(), "{:?}", first.failures);
    for f in &first.files {
        assert!(f.exists(), "{}", f.display());
    }

    let full = load_series_csv(&dir.path().join("rt_full.csv")).unwrap();
    let mem = &first.series[&Model::Full];
    assert_eq!(full.samples.len(), mem.samples.len());
    for (a, b) in full.samples.iter().zip(&mem.samples) {
        assert_eq!(a.t, b.t);
        assert!((a.q - b.q).abs() <= 1e-12 * (1.0 + b.q.abs()));
        assert!((a.sigma_x - b.sigma_x).abs() <= 1e-12);
    }
    let snaps = read_table(std::fs::File::open(dir.path().join("rt_full_momentum.csv")).unwrap()).unwrap();
    assert!(!snaps.rows.is_empty());

    let bytes: Vec<Vec<u8>> = first.files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    let second = run_dynamics(&c, Some(dir.path())).unwrap();
    assert_eq!(first.files, second.files);
    for (f, old) in second.files.iter().zip(&bytes) {
        assert_eq!(&std::fs::read(f).unwrap(), old, "{} changed between runs", f.display());
    }
}

#[test]
fn flat_lattice_models_agree() {
    // v = 0: the two bands are degenerate and the lattice is exactly the Rabi model
    let mut c = small("flat");
    c.wq_over_w0 = Some(0.0);
    c.qubit = QubitSpec::Named("band1".into());
    let run = run_dynamics(&c, None).unwrap();
    assert!(run.failures.is_empty());
    for (a, b) in [(Model::Full, Model::Rabi), (Model::Full, Model::Periodic), (Model::Periodic, Model::Rabi)] {
        let report = run.comparison(a, b).unwrap();
        for obs in ["q", "sigma_x"] {
            let d = report.deviation(obs).unwrap().max_abs;
            assert!(d < 1e-5, "{a} vs {b} {obs}: {d:e}");
        }
    }
}

#[test]
fn convergence_reruns_are_reported() {
    let mut c = small("conv");
    c.t_max = Some(1.0);
    c.convergence = true;
    let run = run_dynamics(&c, None).unwrap();
    let ev = &run.convergence;
    assert!(ev.full_dt_halving_delta.unwrap() < 1e-4);
    assert!(ev.full_grid_doubling_delta.unwrap() < 1e-8);
    assert!(ev.periodic_dt_halving_delta.unwrap() < 1e-4);
    assert!(ev.rabi_cutoff_delta.unwrap() < 1e-10);
}

#[test]
fn config_files_parse_and_run_concurrently() {
    let text = r#"[
        {"kind": "bands", "name": "b", "v": 1.5, "q_resolution": 11},
        {"kind": "dynamics", "name": "d", "g_over_w0": 3, "wq_over_w0": 0,
         "models": ["rabi"], "t_max": 1, "n_records": 5, "cutoff": 80}
    ]"#;
    let list = parse_config(text).unwrap();
    assert_eq!(list.len(), 2);
    assert!(matches!(list[0], Scenario::Bands(_)));
    let dir = tempfile::tempdir().unwrap();
    let results = run_all(&list, Some(dir.path()));
    assert!(results.iter().all(|r| r.as_ref().is_ok_and(Outcome::succeeded)));
    assert!(dir.path().join("b_bands.csv").exists());
    assert!(dir.path().join("d_rabi.csv").exists());
}

#[test]
fn duplicate_names_are_refused() {
    let list = parse_config(
        r#"[{"kind":"bands","name":"x","v":1},{"kind":"bands","name":"x","v":2}]"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(run_all(&list, Some(dir.path())).iter().any(|r| r.is_err()));
}

#[test]
fn builtins_resolve() {
    for name in ["fig1", "fig2", "fig3", "fig4", "all"] {
        for s in builtin(name).unwrap() {
            if let Scenario::Dynamics(c) = s {
                let r = c.resolve().unwrap();
                assert!(r.t_max > 0.0 && r.n_records > 0, "{}", c.name);
            }
        }
    }
    assert!(builtin("fig5").is_err());
}
