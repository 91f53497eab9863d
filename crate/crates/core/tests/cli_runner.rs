use std::path::Path;
use std::process::Command;

use harnack_lab::cli::{build_report, read_paths, run_experiment, strip_timestamp, ExperimentConfig, RunMode};
use harnack_lab::verify::Verdict;
use harnack_lab::Error;
use serde_json::{json, Value};

fn base(out: &Path) -> Value {
    json!({
        "drift": {
            "family": "mollified_indicator",
            "params": { "amplitude": [1.0], "lower": [0.0], "upper": [1.0], "width": 0.1 },
            "p": 4.0, "q": 4.0
        },
        "diffusion": { "sigma": [[1.0]], "delta": 1.01 },
        "horizon": 1.0,
        "n_steps": 32,
        "n_samples": 2000,
        "seed": 7,
        "kappa": 0.8,
        "checks": [
            { "check": "harnack", "label": "one", "f": { "kind": "constant", "value": 1.0 },
              "x": [0.5], "y": [0.52], "p": 2.0 },
            { "check": "girsanov_consistency", "coupling": "shift", "f": { "kind": "constant", "value": 2.0 },
              "x": [0.5], "y": [0.02] },
            { "check": "variance_gradient", "f": { "kind": "constant", "value": 3.0 }, "x": [0.5], "y": [1.0] }
        ],
        "sweeps": [
            { "name": "disp sweep", "parameter": "displacement", "values": [0.0, 0.02, 0.2],
              "base": { "check": "harnack", "f": { "kind": "smooth_bump", "center": [0.5], "radius": 1.0 },
                        "x": [0.5], "y": [0.6], "p": 2.0 } }
        ],
        "output_dir": out
    })
}

fn config(v: &Value) -> harnack_lab::Result<ExperimentConfig> {
    ExperimentConfig::from_json(&v.to_string())
}

fn config_error(v: &Value) -> (String, String) {
    match config(v) {
        Err(Error::Config { path, message }) => (path, message),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn parse_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base(dir.path());
    v["checks"][1]["p"] = json!("two");
    let (path, message) = config_error(&v);
    assert_eq!(path, "checks[1].p");
    assert!(message.contains("line"), "{message}");

    let mut v = base(dir.path());
    v["checks"][0]["bogus"] = json!(1);
    assert_eq!(config_error(&v).0, "checks[0].bogus");

    let mut v = base(dir.path());
    v["drift"]["family"] = json!("no_such_family");
    assert_eq!(config_error(&v).0, "drift");

    let mut v = base(dir.path());
    v["sweeps"][0]["values"] = json!([]);
    assert_eq!(config_error(&v).0, "sweeps[0].values");

    let mut v = base(dir.path());
    v["checks"][0]["y"] = json!([0.5, 0.5]);
    assert!(config_error(&v).0.starts_with("checks[0]"));

    let mut v = base(dir.path());
    v["n_samples"] = json!(0);
    assert_eq!(config_error(&v).0, "n_samples");
}

#[test]
fn config_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base(dir.path());
    v["diffusion"]["delta"] = json!(1.0 + 1e-15);
    let cfg = config(&v).unwrap();
    let text = cfg.to_json().unwrap();
    let again = ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(again.to_json().unwrap(), text);
    let a: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(
        a["diffusion"]["delta"].as_f64().unwrap().to_bits(),
        (1.0 + 1e-15f64).to_bits()
    );

    let file =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/mollified-1d.json")).unwrap();
    let shipped = ExperimentConfig::from_json(&file).unwrap();
    assert_eq!(shipped.checks.len(), 9);
}

#[test]
fn constant_checks_pass_and_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base(dir.path());
    v["dump_paths"] = json!(true);
    let cfg = config(&v).unwrap();
    let out = run_experiment(&cfg, RunMode::Full).unwrap();
    assert_eq!(out.exit_status, 0);
    assert!(out.report.violated.is_empty());
    // a constant f is reproduced exactly except through the weight average
    for c in &out.report.checks {
        assert!(c.verdict.is_ok(), "{c:?}");
    }
    assert_eq!(out.report.checks[0].verdict, Verdict::Holds);
    assert_eq!(out.report.checks[2].verdict, Verdict::Holds);
    let sweep = &out.report.sweeps[0];
    assert_eq!(sweep.rows.len(), 3);
    assert_eq!(sweep.rows[0].factor, Some(1.0));
    assert_eq!(sweep.rows[2].report.verdict, Verdict::NotAdmissible);
    assert!(sweep.threshold.unwrap() > 0.02 && sweep.threshold.unwrap() < 0.2);

    let names: Vec<String> = out
        .files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for n in [
        "report.json",
        "summary.csv",
        "sweep_disp_sweep.csv",
        "sweep_disp_sweep.svg",
        "paths.bin",
    ] {
        assert!(names.iter().any(|m| m == n), "missing {n} in {names:?}");
    }
    let svg = std::fs::read_to_string(dir.path().join("sweep_disp_sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("<!-- 0.02,"), "no data comments");

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let bytes = std::fs::read(dir.path().join("paths.bin")).unwrap();
    let (d, m, n, paths) = read_paths(&bytes).unwrap();
    assert_eq!((d, m, n, paths.len()), (1, 1, 32, 256));
    let (states, incs) = &paths[0];
    assert_eq!((states.len(), incs.len()), (33, 32));
    assert_eq!(states[0], 0.5);
}

#[test]
fn rerun_is_identical_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&base(dir.path())).unwrap();
    let a = serde_json::to_string(&build_report(&cfg, RunMode::Full).unwrap()).unwrap();
    let b = serde_json::to_string(&build_report(&cfg, RunMode::Full).unwrap()).unwrap();
    assert_eq!(strip_timestamp(&a).unwrap(), strip_timestamp(&b).unwrap());
    let mut other = cfg.clone();
    other.seed = 8;
    let c = serde_json::to_string(&build_report(&other, RunMode::Full).unwrap()).unwrap();
    assert_ne!(strip_timestamp(&a).unwrap(), strip_timestamp(&c).unwrap());
}

#[test]
fn verify_mode_selects_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&base(dir.path())).unwrap();
    let r = build_report(&cfg, RunMode::Verify("harnack".parse().unwrap())).unwrap();
    assert_eq!(r.checks.len(), 1);
    assert!(r.sweeps.is_empty());
    assert!(build_report(&cfg, RunMode::Verify("krylov-bound".parse().unwrap())).is_err());
    let h = build_report(&cfg, RunMode::Hypotheses).unwrap();
    assert!(h.kappa.is_none() && h.checks.is_empty());
    assert!(h.hypotheses.admissible_pq);
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, base(&dir.path().join("ignored")).to_string()).unwrap();
    let out = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_harnack-lab");
    let run = |args: &[&str], threads: &str| {
        Command::new(bin)
            .args(args)
            .args([
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--samples",
                "500",
            ])
            .env("HARNACK_LAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let o = run(&["run"], "1");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("harnack"));
    let first = std::fs::read_to_string(out.join("report.json")).unwrap();
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["n_samples"], json!(500));

    let o = run(&["run"], "3");
    assert_eq!(o.status.code(), Some(0));
    let second = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert_eq!(strip_timestamp(&first).unwrap(), strip_timestamp(&second).unwrap());

    let o = run(&["verify", "no_such_check"], "1");
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["estimate-kappa"], "0");
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["hypotheses"], "1");
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("lqp_norm_of_b"));
}
