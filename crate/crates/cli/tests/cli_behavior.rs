//! End-to-end behavior of the command-line interface: file formats, report
//! fields, seeding, and the documented exit codes.

use std::path::Path;
use std::process::Command;

fn resvar() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resvar"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_csv_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data.csv");
    let status = resvar()
        .args(["generate", "--generator", "simdata3", "--n", "1000", "--seed", "0"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x0,x1,target");
    assert_eq!(lines.count(), 1000);

    let meta = read_json(&dir.path().join("data.meta.json"));
    assert_eq!(meta["generator"], "simdata3");
    assert_eq!(meta["seed"], 0);

    let manifest = read_json(&dir.path().join("data.manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert!(manifest["timestamp"].is_u64());

    // Regeneration is byte-identical.
    let out2 = dir.path().join("data2.csv");
    resvar()
        .args(["generate", "--generator", "simdata3", "--n", "1000", "--seed", "0"])
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(&out2).unwrap()
    );
}

#[test]
fn unknown_generator_is_a_usage_error() {
    let status = resvar()
        .args(["generate", "--generator", "nope", "--out", "x.csv"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("possible values"), "stderr: {stderr}");
}

#[test]
fn missing_input_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let status = resvar()
        .args(["residuals", "--data"])
        .arg(dir.path().join("missing.csv"))
        .args(["--model", "poly", "--out"])
        .arg(dir.path().join("res.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

fn generate_simdata3(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("data_{n}_{seed}.csv"));
    let status = resvar()
        .args(["generate", "--generator", "simdata3"])
        .args(["--n", &n.to_string(), "--seed", &seed.to_string()])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    out
}

fn extract_residuals(data: &Path, degree: usize, out: &Path) {
    let status = resvar()
        .args(["residuals", "--data"])
        .arg(data)
        .args(["--model", "poly", "--degree", &degree.to_string()])
        .args(["--scheme", "kfold", "--k", "10", "--seed", "0", "--out"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn residuals_kfold_covers_every_row_once() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_simdata3(dir.path(), 300, 1);
    let out = dir.path().join("res.csv");
    extract_residuals(&data, 2, &out);

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,residual");
    assert_eq!(text.lines().count(), 301);

    let sidecar = read_json(&dir.path().join("res.meta.json"));
    assert_eq!(sidecar["scheme"], "kfold");
    assert_eq!(sidecar["count"], 300);
    assert_eq!(sidecar["coverage_min"], 1);
    assert_eq!(sidecar["coverage_max"], 1);
    assert_eq!(sidecar["model_id"], "poly_deg2");
}

#[test]
fn residuals_oob_reports_even_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_simdata3(dir.path(), 120, 2);
    let out = dir.path().join("oob.csv");
    let status = resvar()
        .args(["residuals", "--data"])
        .arg(&data)
        .args(["--model", "poly", "--degree", "1"])
        .args(["--scheme", "oob", "--seed", "0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let sidecar = read_json(&dir.path().join("oob.meta.json"));
    assert_eq!(sidecar["scheme"], "oob_bootstrap");
    assert_eq!(sidecar["count"], 120);
    let spread = sidecar["coverage_max"].as_u64().unwrap() - sidecar["coverage_min"].as_u64().unwrap();
    assert!(spread <= 1);
}

#[test]
fn test_command_reports_and_degenerates_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_simdata3(dir.path(), 400, 3);
    let res1 = dir.path().join("r1.csv");
    let res2 = dir.path().join("r2.csv");
    extract_residuals(&data, 1, &res1);
    extract_residuals(&data, 2, &res2);

    let report_path = dir.path().join("report.json");
    let status = resvar()
        .args(["test", "--residuals-a"])
        .arg(&res1)
        .arg("--residuals-b")
        .arg(&res2)
        .args(["--method", "hc4", "--diagnostics", "--permutations", "99", "--out"])
        .arg(&report_path)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&report_path);
    assert_eq!(report["n"], 400);
    assert_eq!(report["variance_test"]["method"], "hc4_mp");
    assert!(report["variance_test"]["p_value"].as_f64().unwrap() < 0.05);
    assert_eq!(report["manifest"]["command"], "test");
    assert_eq!(report["manifest"]["input_digests"].as_object().unwrap().len(), 2);
    let diag = &report["diagnostics"];
    assert!(diag["bias_a"]["p_value"].is_f64());
    assert!(diag["paired_t"]["p_value"].is_f64());
    assert!(diag["w1_between"].as_f64().unwrap() > 0.0);
    for key in ["kde_a_csv", "kde_b_csv"] {
        let path = diag[key].as_str().unwrap();
        let kde = std::fs::read_to_string(path).unwrap();
        assert_eq!(kde.lines().next().unwrap(), "grid,density");
        assert_eq!(kde.lines().count(), 513);
    }

    // Same file on both sides: degenerate variance test, degenerate paired
    // t-test surfaced as fields, still exit 0.
    let same_path = dir.path().join("same.json");
    let status = resvar()
        .args(["test", "--residuals-a"])
        .arg(&res1)
        .arg("--residuals-b")
        .arg(&res1)
        .args(["--method", "hc4", "--diagnostics", "--permutations", "99", "--out"])
        .arg(&same_path)
        .status()
        .unwrap();
    assert!(status.success());
    let same = read_json(&same_path);
    assert_eq!(same["variance_test"]["p_value"], 1.0);
    assert_eq!(same["variance_test"]["degenerate"], true);
    assert_eq!(same["diagnostics"]["paired_t"]["degenerate"], true);
}

#[test]
fn test_command_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let data_a = generate_simdata3(dir.path(), 120, 4);
    let data_b = generate_simdata3(dir.path(), 121, 4);
    let res_a = dir.path().join("a.csv");
    let res_b = dir.path().join("b.csv");
    extract_residuals(&data_a, 1, &res_a);
    extract_residuals(&data_b, 1, &res_b);
    let status = resvar()
        .args(["test", "--residuals-a"])
        .arg(&res_a)
        .arg("--residuals-b")
        .arg(&res_b)
        .arg("--out")
        .arg(dir.path().join("na.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(5));
}

#[test]
fn model_fit_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // A constant feature makes the quadratic basis rank deficient.
    let data = dir.path().join("flat.csv");
    let mut text = String::from("x0,target\n");
    for i in 0..50 {
        text.push_str(&format!("1.0,{}\n", i));
    }
    std::fs::write(&data, text).unwrap();
    let status = resvar()
        .args(["residuals", "--data"])
        .arg(&data)
        .args(["--model", "poly", "--degree", "2", "--scheme", "kfold", "--k", "5", "--out"])
        .arg(dir.path().join("res.csv"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("fold"), "stderr: {stderr}");
}

#[test]
fn train_then_reuse_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_simdata3(dir.path(), 200, 5);
    let model_path = dir.path().join("model.json");
    let status = resvar()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--model", "poly", "--degree", "2", "--out"])
        .arg(&model_path)
        .status()
        .unwrap();
    assert!(status.success());
    let doc = read_json(&model_path);
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["input_dim"], 2);
    assert_eq!(doc["parameters"].as_array().unwrap().len(), 6);

    let out = dir.path().join("res.csv");
    let status = resvar()
        .args(["residuals", "--data"])
        .arg(&data)
        .arg("--model-file")
        .arg(&model_path)
        .args(["--scheme", "kfold", "--k", "5", "--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn montecarlo_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.cfg");
    std::fs::write(
        &cfg,
        "# calibration smoke\nreps = 50\nn = 200\nalpha = 0.05\ntest = hc4\nbase-seed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("mc.json");
    let status = resvar()
        .args(["montecarlo", "--config"])
        .arg(&cfg)
        .args(["--reps", "25", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out);
    // The flag wins over the config file.
    assert_eq!(report["config"]["replications"], 25);
    assert_eq!(report["config"]["sample_size"], 200);
    assert_eq!(report["config"]["base_seed"], 3);
    let rate = report["report"]["rejection_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let lo = report["report"]["wilson_low"].as_f64().unwrap();
    let hi = report["report"]["wilson_high"].as_f64().unwrap();
    assert!(lo <= rate && rate <= hi);
}

#[test]
fn montecarlo_config_file_can_request_a_power_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.cfg");
    std::fs::write(&cfg, "reps = 30\nn = 150\nratios = 1.0, 4.0\nkeep-p-values = true\n").unwrap();
    let out = dir.path().join("mc.json");
    let status = resvar()
        .args(["montecarlo", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out);
    let curve = report["power_curve"].as_array().unwrap();
    assert_eq!(curve.len(), 2);
    assert_eq!(curve[0]["variance_ratio"], 1.0);
    assert!(curve[0]["report"]["p_values"].as_array().unwrap().len() <= 30);

    // p-value CSV is single-run only.
    let status = resvar()
        .args(["montecarlo", "--config"])
        .arg(&cfg)
        .arg("--p-values-csv")
        .arg(dir.path().join("p.csv"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn montecarlo_single_replication_is_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc1.json");
    let status = resvar()
        .args(["montecarlo", "--reps", "1", "--n", "100", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rate = read_json(&out)["report"]["rejection_rate"].as_f64().unwrap();
    assert!(rate == 0.0 || rate == 1.0);
}

#[test]
fn montecarlo_invalid_alpha_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = resvar()
        .args(["montecarlo", "--alpha", "1.5", "--reps", "5", "--out"])
        .arg(dir.path().join("mc.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn montecarlo_p_value_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc.json");
    let csv = dir.path().join("p.csv");
    let status = resvar()
        .args(["montecarlo", "--reps", "40", "--n", "100", "--p-values-csv"])
        .arg(&csv)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "replication,p_value");
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn preprocess_applies_housing_recipe_shape() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let mut text = String::from("CRIM,ZN,CHAS,MEDV\n");
    for i in 0..40 {
        text.push_str(&format!("{}.1,{},0,{}\n", i % 7, 10 + (i % 5), 20 + (i % 9)));
    }
    // One row with two gross outliers.
    text.push_str("999.0,999.0,1,21\n");
    std::fs::write(&raw, text).unwrap();
    let out = dir.path().join("clean.csv");
    let status = resvar()
        .args(["preprocess", "--data"])
        .arg(&raw)
        .args(["--target", "MEDV", "--drop", "CHAS", "--log-target", "--max-outliers", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let clean = std::fs::read_to_string(&out).unwrap();
    assert_eq!(clean.lines().next().unwrap(), "CRIM,ZN,target");
    assert_eq!(clean.lines().count(), 41); // header + 40 rows, outlier row gone
    let meta = read_json(&dir.path().join("clean.meta.json"));
    assert_eq!(meta["params"]["rows_removed"], 1);
}

#[test]
fn experiment_rejects_bad_scale() {
    let dir = tempfile::tempdir().unwrap();
    let status = resvar()
        .args(["experiment", "--name", "simdata3", "--scale", "0", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn experiment_simdata4_compares_four_architectures() {
    let dir = tempfile::tempdir().unwrap();
    let status = resvar()
        .args(["experiment", "--name", "simdata4", "--scale", "0.1", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&dir.path().join("report.json"));
    let models: Vec<&str> = report["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["model"].as_str().unwrap())
        .collect();
    assert_eq!(models, ["neuron", "nn_1layer", "nn_2layer", "nn_3layer"]);
    assert_eq!(report["variance_tests"].as_array().unwrap().len(), 3);
    assert!(report.get("f_tests").is_none());
    for m in report["models"].as_array().unwrap() {
        assert!(m["mse"].as_f64().unwrap() > 0.0);
        assert!(m.get("w1_to_base").is_none());
    }
}

#[test]
fn experiment_scale_shrinks_runs_and_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let status = resvar()
        .args(["experiment", "--name", "simdata3", "--runs", "10", "--scale", "0.2", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["runs"], 2);
    assert_eq!(report["epochs"], 40);
    assert_eq!(report["manifest"]["parameters"]["scale"], 0.2);
}
