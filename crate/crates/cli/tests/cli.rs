use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn credlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credlab"))
        .args(args)
        .env_remove("CREDLAB_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

const SMALL: &[&str] = &["--n-pairs", "6", "--n-sims", "300", "--k", "10"];

fn run_in(dir: &Path, head: &[&str], extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args: Vec<&str> = head.to_vec();
    args.extend_from_slice(&["--out", out]);
    args.extend_from_slice(extra);
    credlab(&args)
}

#[test]
fn homogeneous_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut extra = vec!["--ca", "0.3", "--mu", "-3e-3", "--seed", "9"];
    extra.extend_from_slice(SMALL);
    let o = run_in(dir.path(), &["simulate", "homogeneous"], &extra);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(dir.path());
    for f in ["copula.json", "gaussian_copula.json", "deviation.json", "loss_pdf.csv", "summary.json", "manifest.json"] {
        assert!(names.contains(&f.to_string()), "{f} missing from {names:?}");
    }
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["mu"], -3e-3);
    assert_eq!(m["work_units"], 6);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), names.len() - 1);
}

#[test]
fn same_seed_gives_identical_digests() {
    let digests = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let mut extra = vec!["--ca", "0", "--tail-n", "5", "--seed", "4"];
        extra.extend_from_slice(SMALL);
        let o = run_in(dir.path(), &["--workers", workers, "simulate", "homogeneous"], &extra);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest(dir.path())["artifacts"].clone()
    };
    let first = digests("1");
    assert_eq!(first, digests("1"));
    assert_eq!(first, digests("3"));
}

#[test]
fn negative_correlation_outside_pd_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["simulate", "homogeneous"], &["--ca", "-0.9", "--k", "50"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("c_a"), "{err}");
    let m = manifest(dir.path());
    assert_eq!(m["status"], "error");
    assert_eq!(m["error"]["exit_code"], 2);
    assert_eq!(files(dir.path()), vec!["manifest.json"]);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "c_a = 0.2\nmu = 5e-4\nn_pairs = 4\nn_sims = 200\nK = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = run_in(&out, &["simulate", "homogeneous"], &["--config", cfg.to_str().unwrap(), "--mu", "1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["c_a"], 0.2);
    assert_eq!(m["config"]["mu"], 1e-4);
    assert_eq!(m["config"]["K"], 5);

    std::fs::write(&cfg, "c_a = 0.2\nbogus = 1\n").unwrap();
    let o = run_in(&out, &["simulate", "homogeneous"], &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn unknown_preset_and_zero_workers_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["simulate", "homogeneous"], &["--preset", "nope"]).status.code(), Some(2));
    assert_eq!(credlab(&["--workers", "0", "validate-data", "x.csv"]).status.code(), Some(2));
    assert_eq!(credlab(&["simulate", "homogeneous", "--k", "many"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_one_curve_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let extra = ["--k-list", "1,2,4", "--ca-grid", "0,0.5,1", "--mu", "-3e-3", "--n-pairs", "3", "--n-sims", "200"];
    let o = run_in(dir.path(), &["sweep"], &extra);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names = files(dir.path());
    for k in [1, 2, 4] {
        assert!(names.contains(&format!("losscorr_curve_K{k}.csv")), "{names:?}");
    }
    let curve = std::fs::read_to_string(dir.path().join("losscorr_curve_K2.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert_eq!(manifest(dir.path())["work_units"], 27);
}

#[test]
fn empirical_with_missing_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["empirical"], &["--market-a", "/nonexistent/sp500.csv", "--pairing", "within-a"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_in(dir.path(), &["empirical"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["error"]["kind"], "config");
}

#[test]
fn empirical_on_synthetic_prices() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (path, seed, ca) in [(&a, "1", "0.5"), (&b, "2", "0.2")] {
        let o = credlab(&[
            "synth", "--out", path.to_str().unwrap(), "--tickers", "12", "--days", "560", "--seed", seed, "--ca", ca,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let out = dir.path().join("out");
    let extra = [
        "--market-a", a.to_str().unwrap(), "--market-b", b.to_str().unwrap(), "--pairing", "cross", "--k-list", "2,4",
        "--n-iterations", "5", "--n-sims", "300",
    ];
    let o = run_in(&out, &["empirical"], &extra);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["work_units"], 10);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 1);

    let within = dir.path().join("within");
    let o = run_in(&within, &["empirical"], &["--data-dir", dir.path().to_str().unwrap(), "--market-a", "a.csv",
        "--pairing", "within-a", "--k", "3", "--n-iterations", "4", "--n-sims", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_data_reports() {
    let ok = credlab(&["validate-data", fixture("prices_ok.csv").to_str().unwrap()]);
    assert!(ok.status.success());
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("panel: 519 returns x 3 tickers"), "{text}");
    assert!(text.contains("excluded tickers: none"), "{text}");
    assert!(text.contains("date range: 2010-01-04"), "{text}");

    let neg = credlab(&["validate-data", fixture("prices_negative.csv").to_str().unwrap()]);
    assert_eq!(neg.status.code(), Some(1));
    let err = String::from_utf8_lossy(&neg.stderr);
    assert!(err.contains("non-positive price for BBB"), "{err}");

    let miss = credlab(&["validate-data", fixture("prices_missing.csv").to_str().unwrap()]);
    assert!(miss.status.success(), "{}", String::from_utf8_lossy(&miss.stderr));
    let text = String::from_utf8_lossy(&miss.stdout);
    assert!(text.contains("excluded tickers: 1"), "{text}");
    assert!(text.contains("CCC: 10.0% missing"), "{text}");
    assert!(text.contains("x 2 tickers"), "{text}");

    let bad = credlab(&["validate-data", "/nonexistent.csv"]);
    assert_eq!(bad.status.code(), Some(1));
}
