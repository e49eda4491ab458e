//! End-to-end runs of the command-line binary: output tables, manifests,
//! exit codes, and rerun reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attgt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const CANONICAL_CSV: &str = "unit,period,first_treat,outcome,weight,cluster\n\
                             a,1,2,1,1,a\n\
                             a,2,2,5,1,a\n\
                             b,1,,2,1,b\n\
                             b,2,,3,1,b\n";

/// Writes a panel and a pointing config, returning the config path.
fn setup(dir: &Path, csv: &str, design: serde_json::Value) -> PathBuf {
    let input = dir.join("panel.csv");
    fs::write(&input, csv).unwrap();
    let config = serde_json::json!({
        "input": input,
        "design": design,
        "out": dir.join("out"),
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn small_bootstrap() -> serde_json::Value {
    serde_json::json!({"bootstrap": {"n_draws": 150, "seed": 4}, "event_window": [-2, 2]})
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a TSV file, skipping the hash comment and the header.
fn tsv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn estimate_writes_tables_stamped_with_the_manifest_hash() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    assert_exit(&run(&["estimate", "--config", config.to_str().unwrap()]), 0);

    let out = dir.path().join("out");
    let manifest = read_json(&out.join("manifest.json"));
    let hash = manifest["run_hash"].as_str().unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert!(manifest["timings_ms"]["estimate"].is_number());

    for name in ["att_gt.tsv", "overall.tsv", "by_group.tsv", "by_event.tsv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, format!("# manifest: {hash}"), "{name}");
        assert!(manifest["outputs"].as_array().unwrap().iter().any(|o| o == name));
    }

    let att = tsv_rows(&out.join("att_gt.tsv"));
    assert_eq!(att.len(), 1);
    assert_eq!(att[0][..4], ["2", "2", "0", "3"].map(String::from));
    assert_eq!(att[0][7], "estimated");

    let overall = tsv_rows(&out.join("overall.tsv"));
    assert_eq!(overall[0][0], "overall");
    assert_eq!(overall[0][1], "3");

    let results = read_json(&out.join("results.json"));
    assert_eq!(results["manifest_hash"], hash);
    assert_eq!(results["config"]["design"]["control_mode"], "never_treated");
    assert!(results["config"].get("out").is_none());

    let influence = read_json(&out.join("influence.json"));
    assert_eq!(influence["manifest_hash"], hash);
    assert!(influence["families"]["overall"]["overall"].is_object());
}

#[test]
fn flags_override_the_config_document() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    let out2 = dir.path().join("out2");
    assert_exit(
        &run(&[
            "estimate",
            "--config",
            config.to_str().unwrap(),
            "--control",
            "both",
            "--seed",
            "99",
            "--draws",
            "120",
            "--out",
            out2.to_str().unwrap(),
        ]),
        0,
    );
    let results = read_json(&out2.join("results.json"));
    assert_eq!(results["config"]["design"]["control_mode"], "both");
    assert_eq!(results["config"]["design"]["bootstrap"]["seed"], 99);
    assert_eq!(results["config"]["design"]["bootstrap"]["n_draws"], 120);
}

#[test]
fn reruns_are_byte_identical_serial_and_parallel() {
    let dir = TempDir::new().unwrap();
    // a panel big enough that the bootstrap actually parallelizes
    let spec = serde_json::json!({
        "n_units": 40, "first_period": 1, "n_periods": 5,
        "group_shares": [[2, 0.3], [4, 0.3], ["never", 0.4]],
        "effect": {"model": "dynamic", "base": 1.0, "slope": 0.5},
        "noise_sd": 0.4, "unit_effect_sd": 1.0, "seed": 21,
    });
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let sim = dir.path().join("sim");
    assert_exit(
        &run(&["simulate", "--config", spec_path.to_str().unwrap(), "--out", sim.to_str().unwrap()]),
        0,
    );

    let config = dir.path().join("config.json");
    fs::write(
        &config,
        serde_json::json!({
            "input": sim.join("panel.csv"),
            "design": {"bootstrap": {"n_draws": 150, "seed": 8}, "event_window": [-3, 3]},
            "out": dir.path().join("run0"),
        })
        .to_string(),
    )
    .unwrap();

    let cfg = config.to_str().unwrap();
    assert_exit(&run(&["estimate", "--config", cfg]), 0);
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    assert_exit(&run(&["estimate", "--config", cfg, "--out", run1.to_str().unwrap()]), 0);
    assert_exit(
        &run(&["estimate", "--config", cfg, "--out", run2.to_str().unwrap(), "--threads", "2"]),
        0,
    );

    let base = dir.path().join("run0");
    for name in [
        "att_gt.tsv",
        "overall.tsv",
        "by_group.tsv",
        "by_event.tsv",
        "results.json",
        "influence.json",
    ] {
        let reference = fs::read(base.join(name)).unwrap();
        assert_eq!(reference, fs::read(run1.join(name)).unwrap(), "rerun differs: {name}");
        assert_eq!(reference, fs::read(run2.join(name)).unwrap(), "parallel differs: {name}");
    }
    // manifests repeat the hash even though timings vary
    let hashes: Vec<String> = [&base, &run1, &run2]
        .iter()
        .map(|d| read_json(&d.join("manifest.json"))["run_hash"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);
}

#[test]
fn config_problems_exit_2() {
    let out = run(&["estimate", "--config", "/nonexistent/config.json"]);
    assert_exit(&out, 2);

    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    let out = run(&["estimate", "--config", config.to_str().unwrap(), "--draws", "5"]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("100"));
}

#[test]
fn data_problems_exit_3() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    fs::remove_file(dir.path().join("panel.csv")).unwrap();
    assert_exit(&run(&["estimate", "--config", config.to_str().unwrap()]), 3);

    let headless = "unit,period,first_treat,y\na,1,2,1\n";
    let config = setup(dir.path(), headless, small_bootstrap());
    let out = run(&["estimate", "--config", config.to_str().unwrap()]);
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("outcome"));
}

#[test]
fn estimation_failures_exit_4() {
    let dir = TempDir::new().unwrap();
    let all_treated = "unit,period,first_treat,outcome,weight,cluster\n\
                       a,1,2,1,1,a\n\
                       a,2,2,5,1,a\n";
    let config = setup(dir.path(), all_treated, small_bootstrap());
    assert_exit(&run(&["estimate", "--config", config.to_str().unwrap()]), 4);
}

#[test]
fn contrast_of_identical_runs_is_exactly_zero() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    assert_exit(&run(&["estimate", "--config", config.to_str().unwrap()]), 0);
    let est = dir.path().join("out");
    let ddd = dir.path().join("ddd");
    assert_exit(
        &run(&[
            "contrast",
            est.to_str().unwrap(),
            est.to_str().unwrap(),
            "--mode",
            "independent",
            "--out",
            ddd.to_str().unwrap(),
        ]),
        0,
    );
    for row in tsv_rows(&ddd.join("ddd_event.tsv")) {
        assert_eq!(row[1], "0", "event {} not zero", row[0]);
    }
    let doc = read_json(&ddd.join("ddd.json"));
    assert_eq!(doc["overall"]["estimates"][0]["estimate"], 0.0);
    assert_eq!(doc["overall"]["inference_mode"], "independent");
}

#[test]
fn contrast_rejects_mismatched_event_windows() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    assert_exit(&run(&["estimate", "--config", config.to_str().unwrap()]), 0);

    let mut wide: serde_json::Value = read_json(&config);
    wide["design"]["event_window"] = serde_json::json!([-3, 3]);
    wide["out"] = serde_json::json!(dir.path().join("out_wide"));
    let wide_path = dir.path().join("config_wide.json");
    fs::write(&wide_path, wide.to_string()).unwrap();
    assert_exit(&run(&["estimate", "--config", wide_path.to_str().unwrap()]), 0);

    let out = run(&[
        "contrast",
        dir.path().join("out").to_str().unwrap(),
        dir.path().join("out_wide").to_str().unwrap(),
    ]);
    assert_exit(&out, 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("event windows differ"));
}

#[test]
fn contrast_rejects_directories_without_runs() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "contrast",
        dir.path().to_str().unwrap(),
        dir.path().to_str().unwrap(),
    ]);
    assert_exit(&out, 5);
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = serde_json::json!({
        "n_units": 30, "first_period": 1, "n_periods": 4,
        "group_shares": [[2, 0.5], ["never", 0.5]],
        "effect": {"model": "homogeneous", "delta": 2.0},
        "noise_sd": 1.0, "seed": 77,
    });
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for out in [&a, &b] {
        assert_exit(
            &run(&["simulate", "--config", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap()]),
            0,
        );
    }
    assert_exit(
        &run(&[
            "simulate", "--config", spec_path.to_str().unwrap(),
            "--seed", "78", "--out", c.to_str().unwrap(),
        ]),
        0,
    );
    assert_eq!(fs::read(a.join("panel.csv")).unwrap(), fs::read(b.join("panel.csv")).unwrap());
    assert_eq!(fs::read(a.join("truth.json")).unwrap(), fs::read(b.join("truth.json")).unwrap());
    assert_ne!(fs::read(a.join("panel.csv")).unwrap(), fs::read(c.join("panel.csv")).unwrap());

    let truth = read_json(&a.join("truth.json"));
    assert_eq!(truth["truth"]["overall"], 2.0);
    assert_eq!(truth["spec"]["seed"], 77);
}

#[test]
fn impute_command_reports_estimates_and_placebo_note() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    assert_exit(&run(&["impute", "--config", config.to_str().unwrap()]), 0);
    let out = dir.path().join("out");
    let overall = tsv_rows(&out.join("imputation_overall.tsv"));
    let estimate: f64 = overall[0][1].parse().unwrap();
    assert!((estimate - 3.0).abs() < 1e-6);
    let doc = read_json(&out.join("imputation.json"));
    let note = doc["metadata"]["placebo_note"].as_str().unwrap();
    assert!(note.contains("placebos skipped"));
    assert_eq!(doc["manifest_hash"], read_json(&out.join("manifest.json"))["run_hash"]);
}

#[test]
fn diagnose_reports_decomposition_or_the_reason_it_skipped() {
    let dir = TempDir::new().unwrap();
    let config = setup(dir.path(), CANONICAL_CSV, small_bootstrap());
    assert_exit(&run(&["diagnose", "--config", config.to_str().unwrap()]), 0);
    let out = dir.path().join("out");
    let doc = read_json(&out.join("diagnostics.json"));
    assert!((doc["twfe"]["coefficient"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!(doc["bacon_skipped"].is_null());
    assert!(out.join("bacon.tsv").exists());
    let rows = tsv_rows(&out.join("bacon.tsv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "treated_vs_never");

    // drop one row: still diagnosable, but no exact decomposition
    let unbalanced = "unit,period,first_treat,outcome,weight,cluster\n\
                      a,1,2,1,1,a\n\
                      a,2,2,5,1,a\n\
                      b,1,,2,1,b\n\
                      b,2,,3,1,b\n\
                      c,1,,4,1,c\n";
    let config = setup(dir.path(), unbalanced, small_bootstrap());
    let out2 = dir.path().join("out2");
    assert_exit(
        &run(&["diagnose", "--config", config.to_str().unwrap(), "--out", out2.to_str().unwrap()]),
        0,
    );
    let doc = read_json(&out2.join("diagnostics.json"));
    assert!(doc["bacon"].is_null());
    assert!(doc["bacon_skipped"].as_str().unwrap().contains("balanced"));
    assert!(!out2.join("bacon.tsv").exists());
}
