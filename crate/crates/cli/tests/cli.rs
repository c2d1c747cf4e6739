use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mdrobust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdrobust"))
        .args(args)
        .env_remove("MDROBUST_CACHE_DIR")
        .output()
        .expect("spawn mdrobust")
}

fn ok(args: &[&str]) -> Output {
    let out = mdrobust(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Exit code and the single stderr line of a failing run.
fn fails(args: &[&str]) -> (i32, String) {
    let out = mdrobust(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    let errors: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error[")).collect();
    assert_eq!(errors.len(), 1, "expected one error line, got {stderr:?}");
    (out.status.code().unwrap(), errors[0].to_string())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_small(dir: &Path, per_class: usize) -> PathBuf {
    let ds = dir.join("ds");
    ok(&["synth", "--per-class", &per_class.to_string(), "--seed", "42", "--out", p(&ds)]);
    ds
}

fn containers(ds: &Path) -> usize {
    fs::read_dir(ds)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().join("manifest.json").is_file())
        .count()
}

#[test]
fn synth_per_class_writes_thirty_containers() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 10);
    assert_eq!(containers(&ds), 30);
    let summary = fs::read_to_string(ds.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 31);
    assert!(summary.starts_with("id,label,n_range_bins,n_slow_time,n_segments,sha256\n"));
    let run = json(&ds.join("run.json"));
    assert_eq!(run["n_measurements"], 30);
    assert_eq!(run["command"], "synth");
}

#[test]
fn synth_paper_ratio_census() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    let out = ok(&["synth", "--paper-ratio", "--total", "119", "--out", p(&ds), "--json"]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["class_counts"]["drone"], 44);
    assert_eq!(summary["class_counts"]["bird"], 56);
    assert_eq!(summary["class_counts"]["reflector"], 19);
    assert_eq!(containers(&ds), 119);
}

#[test]
fn synth_rerun_gives_identical_dataset_hash() {
    let tmp = TempDir::new().unwrap();
    let hash = |name: &str| {
        let ds = tmp.path().join(name);
        ok(&["synth", "--per-class", "6", "--seed", "42", "--out", p(&ds)]);
        json(&ds.join("run.json"))["dataset_hash"].as_str().unwrap().to_string()
    };
    let a = hash("a");
    assert_eq!(a, hash("b"));
    let c = tmp.path().join("c");
    ok(&["synth", "--per-class", "6", "--seed", "7", "--out", p(&c)]);
    assert_ne!(a, json(&c.join("run.json"))["dataset_hash"].as_str().unwrap());
}

#[test]
fn non_empty_output_needs_force() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 6);
    let (code, line) = fails(&["synth", "--per-class", "6", "--out", p(&ds)]);
    assert_eq!(code, 1);
    assert!(line.starts_with("error[output-exists]:"), "{line}");
    // a smaller forced rerun leaves no stale containers behind
    ok(&["synth", "--per-class", "5", "--out", p(&ds), "--force"]);
    assert_eq!(containers(&ds), 15);
}

#[test]
fn extract_raw_table_schema() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 5);
    let out = tmp.path().join("x");
    ok(&["extract", p(&ds), "--noise", "raw", "--out", p(&out)]);
    let table = fs::read_to_string(out.join("features.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..2], ["measurement_id", "label"]);
    let features = [
        "sler",
        "sidelobe_entropy",
        "spectral_entropy",
        "temporal_entropy",
        "temporal_energy_variance",
        "doppler_bw_p80",
        "doppler_spread",
        "zero_doppler_ratio",
        "skewness",
        "kurtosis",
    ];
    for f in features {
        assert!(header.contains(&f), "missing column {f}");
    }
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));
    assert!(json(&out.join("run.json"))["outputs"].as_array().unwrap().len() >= 2);
}

#[test]
fn extract_records_combined_tier() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 5);
    let out = tmp.path().join("x");
    ok(&["extract", p(&ds), "--noise", "combined:-1:3", "--out", p(&out), "--spectrograms"]);
    let meta = json(&out.join("features.meta.json"));
    assert_eq!(meta["condition"]["severity"], "moderate");
    assert_eq!(meta["condition"]["noise"], "combined:-1:3");
    let run = json(&out.join("run.json"));
    assert_eq!(run["extra"]["condition"]["severity"], "moderate");
    assert_eq!(fs::read_dir(out.join("spectrograms")).unwrap().count(), 15);
}

#[test]
fn extract_is_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 5);
    let table = |jobs: &str| {
        let out = tmp.path().join(format!("x{jobs}"));
        ok(&["extract", p(&ds), "--noise", "awgn:-5", "--out", p(&out), "--jobs", jobs]);
        fs::read(out.join("features.csv")).unwrap()
    };
    assert_eq!(table("1"), table("3"));
}

#[test]
fn malformed_noise_spec_has_usage_hint() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 5);
    let out = tmp.path().join("x");
    let (code, line) = fails(&["extract", p(&ds), "--noise", "awgn:abc", "--out", p(&out)]);
    assert_eq!(code, 1);
    assert!(line.starts_with("error[noise-spec]:"), "{line}");
    assert!(line.contains("usage: --noise"), "{line}");
}

#[test]
fn missing_dataset_is_reported() {
    let tmp = TempDir::new().unwrap();
    let (_, line) = fails(&["extract", p(&tmp.path().join("nope")), "--out", p(&tmp.path().join("x"))]);
    assert!(line.starts_with("error[dataset]:"), "{line}");
}

#[test]
fn evaluate_table3_reports_33_conditions() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 8);
    let out = tmp.path().join("e");
    ok(&[
        "evaluate", p(&ds), "--classifier", "rf", "--schedule", "table3", "--out", p(&out), "--skip-ablation",
    ]);
    let report = json(&out.join("report.json"));
    assert_eq!(report["conditions"].as_array().unwrap().len(), 33);
    for f in ["folds.csv", "aggregate.csv", "importance.csv", "confusion.csv", "split.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("ablation.csv").exists());
    // 33 conditions × 5 folds
    assert_eq!(fs::read_to_string(out.join("folds.csv")).unwrap().lines().count(), 1 + 33 * 5);
    assert_eq!(json(&out.join("run.json"))["extra"]["n_conditions"], 33);
}

#[test]
fn evaluate_svm_rbf_uses_fixed_hyperparameters() {
    let tmp = TempDir::new().unwrap();
    let ds = synth_small(tmp.path(), 8);
    let out = tmp.path().join("e");
    ok(&["evaluate", p(&ds), "--classifier", "svm-rbf", "--features", "selected5", "--out", p(&out)]);
    let run = json(&out.join("run.json"));
    let rbf = &run["config"]["svm_rbf"];
    assert_eq!(rbf["c"], 100.0);
    assert_eq!(rbf["kernel"]["type"], "rbf");
    assert_eq!(rbf["kernel"]["gamma"], 0.1);
    assert_eq!(run["config"]["classifier"], "svm-rbf");
    assert_eq!(json(&out.join("report.json"))["classifier"], "svm-rbf");
    assert_eq!(fs::read_to_string(out.join("ablation.csv")).unwrap().lines().count(), 7);
}

#[test]
fn evaluate_accepts_a_synthetic_reference() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    let stdout = ok(&[
        "evaluate", "synth:per-class:8:42", "--noise", "raw", "--noise", "awgn:-5", "--out", p(&out),
        "--skip-ablation", "--json",
    ])
    .stdout;
    let summary: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(summary["n_conditions"], 2);
    assert!(summary["raw_mean_f1"].as_f64().unwrap() > 0.5);
}

#[test]
fn config_problems_are_listed_together() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    let (code, line) = fails(&[
        "evaluate", "synth:per-class:8", "--classifier", "svm-linear", "--features", "full10", "--schedule", "bogus",
        "--window", "0", "--out", p(&out),
    ]);
    assert_eq!(code, 1);
    assert!(line.starts_with("error[config]:"), "{line}");
    for needle in ["exactly one feature", "bogus", "window"] {
        assert!(line.contains(needle), "{needle} not in {line}");
    }
    assert!(!out.exists());
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("e");
    fs::write(
        &cfg,
        format!(
            "dataset = \"synth:per-class:8\"\nout = {:?}\nclassifier = \"svm-rbf\"\nnoise = [\"raw\", \"phase:5\"]\nskip_ablation = true\nseed = 7\n",
            p(&out)
        ),
    )
    .unwrap();
    ok(&["evaluate", "--config", p(&cfg), "--classifier", "rf"]);
    let report = json(&out.join("report.json"));
    assert_eq!(report["classifier"], "rf");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["conditions"].as_array().unwrap().len(), 2);
    assert!(!out.join("ablation.csv").exists());

    fs::write(&cfg, "classifer = \"rf\"\n").unwrap();
    let (_, line) = fails(&["evaluate", "--config", p(&cfg)]);
    assert!(line.starts_with("error[config]:"), "{line}");
}

#[test]
fn bad_flags_are_usage_errors() {
    let (code, line) = fails(&["synth", "--bogus"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error[usage]:"), "{line}");
}
