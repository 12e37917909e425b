use std::path::Path;
use std::process::{Command, Output};

fn pfbo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfbo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pfbo(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

fn simulate(dir: &Path, name: &str, length: &str, seed: &str) {
    ok(dir, &["simulate", "--length", length, "--seed", seed, "--out", name]);
}

#[test]
fn simulate_is_deterministic_and_writes_manifest() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), "a.csv", "200", "3");
    simulate(d.path(), "b.csv", "200", "3");
    assert_eq!(read(d.path().join("a.csv")), read(d.path().join("b.csv")));
    let m: serde_json::Value = serde_json::from_slice(&read(d.path().join("a.manifest.json"))).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["master_seed"], 3);
    assert_eq!(m["config"]["args"]["length"], 200);
    assert!(m["finished_at"].is_string());
}

#[test]
fn simulated_first_differences_have_model_variance() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "simulate", "--tau2", "0.012", "--length", "10000", "--seed", "7", "--out", "s.csv",
        ],
    );
    let text = String::from_utf8(read(d.path().join("s.csv"))).unwrap();
    let y: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let n = dy.len() as f64;
    let mean = dy.iter().sum::<f64>() / n;
    let var = dy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expect = 0.012 + 2.0 * 1.043;
    assert!((var - expect).abs() < 0.05 * expect, "{var}");
}

#[test]
fn usage_and_validation_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), "s.csv", "50", "1");
    for args in [
        vec!["simulate", "--length", "0", "--out", "x.csv"],
        vec!["simulate", "--tau2", "-1", "--out", "x.csv"],
        vec!["loglik", "--series", "s.csv", "--theta", "-1"],
        vec!["loglik", "--series", "s.csv"],
        vec![
            "optimize", "--series", "s.csv", "--bounds", "0.02", "0.01", "--out", "t.csv",
        ],
        vec!["nonsense"],
    ] {
        assert_eq!(pfbo(d.path(), &args).status.code(), Some(2), "{args:?}");
    }
    let missing = pfbo(d.path(), &["loglik", "--series", "missing.csv", "--theta", "0.01"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.csv"));
}

#[test]
fn loglik_engines_agree() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), "s.csv", "500", "1");
    let k1 = ok(d.path(), &["loglik", "--series", "s.csv", "--theta", "0.01"]);
    let k2 = ok(
        d.path(),
        &["loglik", "--series", "s.csv", "--theta", "0.01", "--engine", "kalman"],
    );
    assert_eq!(k1, k2);
    let kalman: f64 = k1.trim().parse().unwrap();
    let pf: Vec<f64> = (0..4)
        .map(|s| {
            let seed = s.to_string();
            let args = [
                "loglik",
                "--series",
                "s.csv",
                "--theta",
                "0.01",
                "--engine",
                "pf",
                "--particles",
                "100000",
                "--seed",
                &seed,
            ];
            ok(d.path(), &args).trim().parse().unwrap()
        })
        .collect();
    let mean = pf.iter().sum::<f64>() / 4.0;
    let sd = (pf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    for v in &pf {
        assert!((v - kalman).abs() <= 4.0 * sd.max(1e-3), "{v} vs {kalman} (sd {sd})");
    }

    let out = ok(
        d.path(),
        &[
            "loglik",
            "--series",
            "s.csv",
            "--theta",
            "0.01",
            "--per-step",
            "--manifest",
            "ll.json",
        ],
    );
    let mut lines = out.lines();
    let total: f64 = lines.next().unwrap().parse().unwrap();
    assert_eq!(lines.next(), Some("t,loglik_increment"));
    let steps: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(steps.len(), 500);
    assert!((steps.iter().sum::<f64>() - total).abs() < 1e-9);
    assert!(d.path().join("ll.json").exists());
}

#[test]
fn optimize_writes_trace_and_reruns_identically() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), "s.csv", "100", "2");
    let args = [
        "optimize",
        "--series",
        "s.csv",
        "--particles",
        "200",
        "--iters",
        "5",
        "--seed",
        "9",
        "--normalizer-reps",
        "3",
    ];
    let a = ok(d.path(), &[&args[..], &["--out", "a/trace.csv"]].concat());
    let b = ok(d.path(), &[&args[..], &["--out", "b/trace.csv"]].concat());
    assert_eq!(a, b);
    let trace = read(d.path().join("a/trace.csv"));
    assert_eq!(trace, read(d.path().join("b/trace.csv")));
    let text = String::from_utf8(trace.clone()).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("t,x_evaluated,raw_value,std_value,kappa,incumbent_x,incumbent_mean")
    );
    assert_eq!(text.lines().count(), 1 + 5 + 5);

    std::fs::remove_file(d.path().join("a/trace.csv")).unwrap();
    ok(d.path(), &["rerun", "a/trace.manifest.json"]);
    assert_eq!(read(d.path().join("a/trace.csv")), trace);
}

#[test]
fn optimize_with_no_iterations_keeps_only_the_design() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), "s.csv", "100", "2");
    ok(
        d.path(),
        &[
            "optimize",
            "--series",
            "s.csv",
            "--particles",
            "100",
            "--iters",
            "0",
            "--normalizer-reps",
            "2",
            "--out",
            "t.csv",
        ],
    );
    let text = String::from_utf8(read(d.path().join("t.csv"))).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().skip(1).all(|l| l.starts_with("0,")));
}

#[test]
fn experiment_reports_field_paths() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"series": {"kind": "simulate", "tau2": 0.012, "length": 50, "seed": 1}}"#,
            "master_seed",
        ),
        (
            r#"{"master_seed": 1, "series": {"kind": "simulate", "tau2": 0.012, "length": "x", "seed": 1}}"#,
            "series.length",
        ),
        (
            r#"{"master_seed": 1, "series": {"kind": "file", "path": "s.csv"}, "reps": 3}"#,
            "reps",
        ),
        (
            r#"{"master_seed": 1, "series": {"kind": "file", "path": "s.csv"}, "sigma_n": [0.3, "a"]}"#,
            "sigma_n[1]",
        ),
    ];
    for (i, (json, field)) in cases.iter().enumerate() {
        let name = format!("c{i}.json");
        std::fs::write(d.path().join(&name), json).unwrap();
        let out = pfbo(d.path(), &["experiment", "--config", &name, "--out", "o"]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
}

#[test]
fn experiment_emits_exports_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "master_seed": 3,
        "series": {"kind": "simulate", "tau2": 0.012, "length": 60, "seed": 6},
        "particle_counts": [50],
        "sigma_n": [0.3],
        "length_scales": [0.2, 0.5],
        "repetitions": 2,
        "iterations": 3,
        "normalizer_reps": 3,
        "snapshot_grid": 11
    }"#;
    std::fs::write(d.path().join("cfg.json"), cfg).unwrap();
    ok(d.path(), &["experiment", "--config", "cfg.json", "--out", "run1"]);
    let m: serde_json::Value = serde_json::from_slice(&read(d.path().join("run1/manifest.json"))).unwrap();
    assert_eq!(m["config"]["resolved"]["repetitions"], 2);
    assert_eq!(m["config"]["resolved"]["eps_x"], 0.01);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 9);
    for o in outputs {
        assert!(d.path().join(o.as_str().unwrap()).exists());
    }
}
