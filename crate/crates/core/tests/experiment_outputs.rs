use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use perone::experiment::{run_experiment, sweep, ExperimentConfig, Manifest, MANIFEST_FILE, SWEEP_FILE, SWEEP_HEADER};
use perone::Error;
use serde_json::{json, Value};

fn minimal() -> Value {
    json!({
        "topology": {"generate": {
            "radio": {"aps": [{"x": 0.0, "y": 0.0, "class": "macro"}, {"x": 60.0, "y": 0.0, "class": "micro"}]},
            "grid": {"columns": 2, "rows": 1, "spacing": 30.0}
        }},
        "trace": {"synthetic": {
            "horizon": 12,
            "seed": 1,
            "profile": {"base_min": 20.0, "base_max": 40.0, "slots_per_day": 12, "shape": {"kind": "flat"}, "noise": 0.0}
        }},
        "partition": {"zones": 1, "slots_per_zone": 12},
        "cost": {"alpha": 0.0, "rho0": 1.0}
    })
}

fn config(v: &Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn minimal_run_writes_three_files_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, outcome) = run_experiment(&config(&minimal()), dir.path()).unwrap();
    let files = read_dir(dir.path());
    assert_eq!(files.len(), 4, "{:?}", files.keys().collect::<Vec<_>>());
    assert!(files.contains_key(MANIFEST_FILE));
    assert_eq!(manifest.files.len(), 3);
    for f in &manifest.files {
        assert_eq!(files[&f.name].len(), f.bytes);
    }
    assert!(outcome.report.benchmark_converged);
    let on_disk: Manifest = serde_json::from_slice(&files[MANIFEST_FILE]).unwrap();
    assert_eq!(on_disk, manifest);
}

#[test]
fn auto_eta_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topology.json");
    fs::write(&topo, r#"{"n_locations": 1, "n_aps": 2, "service_rate": [1.0, 2.0]}"#).unwrap();
    let cfg = json!({
        "topology": {"file": topo},
        "trace": {"synthetic": {
            "horizon": 18, "seed": 0,
            "profile": {"base_min": 1.0, "base_max": 1.0, "slots_per_day": 6, "shape": {"kind": "flat"}}
        }},
        "partition": {"zones": 2, "slots_per_zone": 3},
        "cost": {"alpha": 0.0, "rho0": 1.0},
        "eta": "auto"
    });
    let out = dir.path().join("out");
    let (manifest, _) = run_experiment(&config(&cfg), &out).unwrap();
    // L = 1, K = 2, T = 18, M_I = 1, M_J = 2, |I| = 1
    let expected = (2.0 * 2.0 * 1.0 * 1.0 * 2f64.ln() / (18.0 * 1.0 * 2.0)).sqrt();
    let resolved = manifest.runs[0].resolved_eta.unwrap();
    assert!(resolved.auto);
    assert!((resolved.lipschitz - 1.0).abs() < 1e-15);
    assert!((resolved.eta - expected).abs() < 1e-15, "{} vs {expected}", resolved.eta);
    assert_eq!(resolved.eta_star, Some(resolved.eta));
    let text = fs::read_to_string(out.join(MANIFEST_FILE)).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["runs"][0]["resolved_eta"]["eta"].as_f64().unwrap(), expected);
    assert_eq!(doc["config"]["eta"], json!("auto"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let mut cfg = minimal();
    cfg["trace"]["synthetic"]["profile"]["noise"] = json!(0.3);
    cfg["benchmarks"] = json!({"static": true, "dynamic": true});
    cfg["write_runlog_json"] = json!(true);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(&cfg), a.path()).unwrap();
    run_experiment(&config(&cfg), b.path()).unwrap();
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert_eq!(fa.len(), 7);
    assert_eq!(fa, fb);
}

fn sweep_config() -> Value {
    let mut cfg = minimal();
    cfg["trace"]["synthetic"]["horizon"] = json!(48);
    cfg["trace"]["synthetic"]["profile"]["noise"] = json!(0.2);
    cfg["trace"]["synthetic"]["profile"]["base_max"] = json!(400.0);
    cfg["trace"]["synthetic"]["profile"]["shape"] = json!({"kind": "sinusoidal", "amplitude": 0.8, "phase": 0.0});
    cfg["partition"] = json!({"zones": 1, "period_slots": 12});
    cfg["cost"]["psi"] = json!(3.0);
    cfg
}

fn sweep_lines(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join(SWEEP_FILE))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn zone_sweep_matches_single_runs() {
    let mut cfg = sweep_config();
    cfg["sweep"] = json!({"zones": [1, 2]});
    let dir = tempfile::tempdir().unwrap();
    let outcome = sweep(&config(&cfg), dir.path(), Some(2)).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    let lines = sweep_lines(dir.path());
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 3);

    for (row, k) in outcome.rows.iter().zip([1, 2]) {
        let mut single = sweep_config();
        single["partition"]["zones"] = json!(k);
        let d = tempfile::tempdir().unwrap();
        let (_, run) = run_experiment(&config(&single), d.path()).unwrap();
        let r = row.report.as_ref().unwrap();
        assert_eq!(r.regret.regret, run.report.regret.regret);
        assert_eq!(r.combination.zones, k);
        assert_eq!(r.slots_per_zone, 12 / k);
    }
}

#[test]
fn stricter_threshold_never_reduces_benchmark_violations() {
    let mut cfg = sweep_config();
    cfg["sweep"] = json!({"rho0": [0.5, 1.0]});
    let dir = tempfile::tempdir().unwrap();
    let outcome = sweep(&config(&cfg), dir.path(), None).unwrap();
    let v: Vec<usize> = outcome
        .rows
        .iter()
        .map(|r| r.report.as_ref().unwrap().regret.violations_benchmark.unwrap().slot_ap)
        .collect();
    assert!(v[0] >= v[1], "{v:?}");
    assert!(v[0] > 0);
}

#[test]
fn failed_combinations_become_error_rows() {
    let mut cfg = sweep_config();
    cfg["sweep"] = json!({"zones": [5, 2], "alpha": [0.0, 1.0]});
    let dir = tempfile::tempdir().unwrap();
    let outcome = sweep(&config(&cfg), dir.path(), Some(1)).unwrap();
    assert_eq!(outcome.rows.len(), 4);
    let errors: Vec<bool> = outcome.rows.iter().map(|r| r.error.is_some()).collect();
    // K = 5 does not split the 12-slot period; alpha = 1 with rho0 = 1 is invalid
    assert_eq!(errors, vec![true, true, false, true]);
    let lines = sweep_lines(dir.path());
    assert!(lines[1].ends_with('"') && lines[1].contains("period_slots"));
    assert!(lines[3].ends_with(','));
    assert_eq!(outcome.manifest.runs.iter().filter(|r| r.error.is_some()).count(), 3);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let mut cfg = sweep_config();
    cfg["sweep"] = json!({"zones": [1, 2, 3, 4], "eta": ["auto", 0.01]});
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    sweep(&config(&cfg), a.path(), Some(1)).unwrap();
    sweep(&config(&cfg), b.path(), Some(4)).unwrap();
    assert_eq!(read_dir(a.path()), read_dir(b.path()));
}

fn config_error_key(v: &Value) -> String {
    let err = ExperimentConfig::from_json(&v.to_string())
        .and_then(|c| c.validate().map(|_| c))
        .unwrap_err();
    match err {
        Error::Config { key, message } => format!("{key}: {message}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_name_the_key() {
    let mut cfg = minimal();
    cfg["cost"]["rho0"] = json!(1.5);
    assert!(config_error_key(&cfg).starts_with("cost.rho0"), "{}", config_error_key(&cfg));

    let mut cfg = minimal();
    cfg["eta"] = json!(-1.0);
    assert!(config_error_key(&cfg).starts_with("eta"));

    let mut cfg = minimal();
    cfg["partition"]["zones"] = json!(0);
    assert!(config_error_key(&cfg).starts_with("partition.zones"));

    let mut cfg = minimal();
    cfg["sweep"] = json!({"rho0": []});
    assert!(config_error_key(&cfg).starts_with("sweep.rho0"));

    let mut cfg = minimal();
    cfg["trace"]["synthetic"]["profile"]["noise"] = json!(1.0);
    assert!(config_error_key(&cfg).starts_with("trace.synthetic.profile.noise"));

    let mut cfg = minimal();
    cfg["partiton"] = json!({});
    assert!(config_error_key(&cfg).contains("partiton"));

    let mut cfg = minimal();
    cfg["topology"] = json!({"generate": cfg["topology"]["generate"].clone(), "file": "x.json"});
    assert!(config_error_key(&cfg).starts_with("config"));
}

#[test]
fn missing_trace_file_is_an_io_error() {
    let mut cfg = minimal();
    cfg["trace"] = json!({"csv": {"path": "/definitely/not/here.csv"}});
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&config(&cfg), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}
