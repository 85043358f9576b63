use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mvgsa");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn front_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/blockworld_front.csv")
}

fn mvgsa(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn mvgsa")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        stderr(o)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// `variable -> (msi, tsi)` from an indices CSV written by `gsa`.
fn indices(p: &Path) -> Vec<(String, f64, f64)> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let h = r.headers().unwrap().clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name} in {h:?}"))
    };
    let (v, m, t) = (col("variable"), col("msi"), col("tsi"));
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[v].to_string(),
                rec[m].parse().unwrap(),
                rec[t].parse().unwrap(),
            )
        })
        .collect()
}

/// Qualitative coordinates of every row of a dataset CSV.
fn level_rows(p: &Path) -> BTreeSet<Vec<usize>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let h = r.headers().unwrap().clone();
    let cols: Vec<usize> = h
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("t_"))
        .map(|(i, _)| i)
        .collect();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            cols.iter().map(|&i| rec[i].parse().unwrap()).collect()
        })
        .collect()
}

#[test]
fn fit_shipped_sample_then_gsa_on_the_model() {
    let dir = TempDir::new().unwrap();
    let fit_out = dir.path().join("fit");
    let o = mvgsa(&[
        "fit",
        "--data",
        s(&data("mixed_ishigami_l5.csv")),
        "--space",
        s(&data("mixed_ishigami_l5.space.json")),
        "--starts",
        "4",
        "--out",
        s(&fit_out),
    ]);
    ok(&o);
    let report = read_json(&fit_out.join("fit_report.json"));
    let rel = report["responses"][0]["holdout_rel_rmse"].as_f64().unwrap();
    assert!(rel < 0.10, "holdout RMSE {rel} of response std");
    let model = fit_out.join("model_y_1.json");
    assert!(model.exists());
    assert!(fit_out.join("latent_y_1.csv").exists());

    let meta_out = dir.path().join("meta");
    ok(&mvgsa(&[
        "gsa",
        "--evaluator",
        &format!("model:{}", s(&model)),
        "--n-base",
        "8192",
        "--out",
        s(&meta_out),
    ]));
    let direct_out = dir.path().join("direct");
    ok(&mvgsa(&[
        "gsa",
        "--evaluator",
        "direct:ishigami-mv:L=5",
        "--n-base",
        "8192",
        "--out",
        s(&direct_out),
    ]));
    let meta = indices(&meta_out.join("indices.csv"));
    let direct = indices(&direct_out.join("indices.csv"));
    assert_eq!(meta.len(), 3);
    for ((vm, msi_m, tsi_m), (vd, msi_d, tsi_d)) in meta.iter().zip(&direct) {
        assert_eq!(vm, vd);
        assert!((msi_m - msi_d).abs() <= 0.05, "{vm} MSI {msi_m} vs {msi_d}");
        assert!((tsi_m - tsi_d).abs() <= 0.05, "{vm} TSI {tsi_m} vs {tsi_d}");
    }
    assert!(meta_out.join("bars.csv").exists());
}

#[test]
fn fit_reports_missing_csv_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let o = mvgsa(&[
        "fit",
        "--data",
        s(&missing),
        "--space",
        s(&data("mixed_ishigami_l5.space.json")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
    // the manifest is written first and records the failure
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert!(manifest["status"].as_str().unwrap().starts_with("failed"));
}

#[test]
fn constant_data_fits_without_holdout_and_gsa_reports_constant_response() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(data("mixed_ishigami_l5.csv")).unwrap();
    let mut lines = text.lines();
    let mut flat = format!("{}\n", lines.next().unwrap());
    for line in lines.take(30) {
        let (inputs, _) = line.rsplit_once(',').unwrap();
        flat.push_str(&format!("{inputs},2.5\n"));
    }
    let csv = dir.path().join("flat.csv");
    std::fs::write(&csv, flat).unwrap();
    let out = dir.path().join("fit");
    ok(&mvgsa(&[
        "fit",
        "--data",
        s(&csv),
        "--space",
        s(&data("mixed_ishigami_l5.space.json")),
        "--holdout-frac",
        "0",
        "--starts",
        "1",
        "--max-iters",
        "50",
        "--out",
        s(&out),
    ]));
    let report = read_json(&out.join("fit_report.json"));
    let entry = report["responses"][0].as_object().unwrap();
    assert!(
        !entry.contains_key("holdout_rmse") && !entry.contains_key("holdout_rel_rmse"),
        "{entry:?}"
    );

    let model = out.join("model_y_1.json");
    let o = mvgsa(&[
        "gsa",
        "--evaluator",
        &format!("model:{}", s(&model)),
        "--n-base",
        "256",
        "--out",
        s(&dir.path().join("gsa")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("constant response"), "{}", stderr(&o));
}

#[test]
fn gsa_direct_ishigami_matches_reference_values() {
    let dir = TempDir::new().unwrap();
    ok(&mvgsa(&[
        "gsa",
        "--evaluator",
        "direct:ishigami",
        "--n-base",
        "16384",
        "--out",
        s(dir.path()),
    ]));
    let got = indices(&dir.path().join("indices.csv"));
    let msi = [0.3138, 0.4413, 0.0];
    let tsi = [0.5575, 0.4424, 0.2436];
    for (i, (name, m, t)) in got.iter().enumerate() {
        assert!((m - msi[i]).abs() <= 0.02, "{name} MSI {m}");
        assert!((t - tsi[i]).abs() <= 0.02, "{name} TSI {t}");
    }
    let json = read_json(&dir.path().join("indices.json"));
    assert!(json.is_object());
}

#[test]
fn gsa_rejects_unknown_evaluator() {
    let dir = TempDir::new().unwrap();
    let o = mvgsa(&[
        "gsa",
        "--evaluator",
        "direct:rosenbrock",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown evaluator"));
}

fn bo_front(framework: &str, dir: &Path) -> BTreeSet<Vec<usize>> {
    let fixture = front_fixture();
    ok(&mvgsa(&[
        "bo",
        "--framework",
        framework,
        "--evaluator",
        "direct:blockworld",
        "--oracle-front",
        s(&fixture),
        "--seed",
        "1",
        "--out",
        s(dir),
    ]));
    for f in [
        "trace.csv",
        "trace.json",
        "front.csv",
        "history.csv",
        "manifest.json",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    level_rows(&dir.join("front.csv"))
}

#[test]
fn bo_sensitivity_aware_recovers_fixture_front() {
    let dir = TempDir::new().unwrap();
    let front = bo_front("sensitivity-aware", dir.path());
    assert_eq!(front, level_rows(&front_fixture()));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(
        trace.contains(",stage1,") && trace.contains(",doe,"),
        "stage tags missing"
    );
}

#[test]
fn bo_vanilla_recovers_fixture_front() {
    let dir = TempDir::new().unwrap();
    let front = bo_front("vanilla", dir.path());
    assert_eq!(front, level_rows(&front_fixture()));
}

#[test]
fn bo_with_zero_budget_keeps_only_the_doe() {
    let dir = TempDir::new().unwrap();
    ok(&mvgsa(&[
        "bo",
        "--framework",
        "vanilla",
        "--budget",
        "0",
        "--doe-n",
        "12",
        "--out",
        s(dir.path()),
    ]));
    let mut r = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    let stage = r
        .headers()
        .unwrap()
        .iter()
        .position(|c| c == "stage")
        .unwrap();
    let stages: Vec<String> = r
        .records()
        .map(|rec| rec.unwrap()[stage].to_string())
        .collect();
    assert_eq!(stages.len(), 12);
    assert!(stages.iter().all(|s| s == "doe"));
}

#[test]
fn bo_rejects_single_objective_evaluator() {
    let dir = TempDir::new().unwrap();
    let o = mvgsa(&[
        "bo",
        "--evaluator",
        "direct:ishigami",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_rejects_empty_level_list() {
    let dir = TempDir::new().unwrap();
    let o = mvgsa(&[
        "validate",
        "--function",
        "ishigami",
        "--levels",
        "",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn validate_rejects_unknown_function() {
    let dir = TempDir::new().unwrap();
    let o = mvgsa(&["validate", "--function", "branin", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_small_study_writes_report() {
    let dir = TempDir::new().unwrap();
    ok(&mvgsa(&[
        "validate",
        "--function",
        "ishigami",
        "--levels",
        "2,5",
        "--n-direct",
        "4096",
        "--n-meta",
        "1024",
        "--starts",
        "2",
        "--out",
        s(dir.path()),
    ]));
    let mut r = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name} in {h:?}"))
    };
    let (var, kind, true_mv) = (col("variable"), col("index"), col("true_mv"));
    let mut checked = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        if &rec[var] == "t3" && &rec[kind] == "msi" {
            let v: f64 = rec[true_mv].parse().unwrap();
            assert!(v <= 0.01, "True-MV MSI of t3 {v}");
            checked += 1;
        }
    }
    assert_eq!(checked, 2);
    assert!(dir.path().join("convergence_summary.csv").exists());
}

#[test]
fn flags_override_config_and_run_conf_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("sample.conf");
    std::fs::write(
        &conf,
        "# design dump\nevaluator = direct:ishigami-mv:L=4\nn = 40\nmethod = sobol\nseed = 11\n",
    )
    .unwrap();
    let first = dir.path().join("first");
    ok(&mvgsa(&[
        "sample",
        "--config",
        s(&conf),
        "--n",
        "24",
        "--out",
        s(&first),
    ]));
    let rows = std::fs::read_to_string(first.join("samples.csv")).unwrap();
    assert_eq!(rows.lines().count(), 25, "flag must override the file");

    let again = dir.path().join("again");
    ok(&mvgsa(&[
        "sample",
        "--config",
        s(&first.join("run.conf")),
        "--out",
        s(&again),
    ]));
    assert_eq!(
        std::fs::read(first.join("samples.csv")).unwrap(),
        std::fs::read(again.join("samples.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(first.join("space.json")).unwrap(),
        std::fs::read(again.join("space.json")).unwrap()
    );

    let manifest = read_json(&first.join("manifest.json"));
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["command"], "sample");
}

#[test]
fn gsa_rerun_from_run_conf_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    ok(&mvgsa(&[
        "gsa",
        "--evaluator",
        "direct:hartmann6-mv:L=6",
        "--n-base",
        "1024",
        "--seed",
        "5",
        "--out",
        s(&first),
    ]));
    let again = dir.path().join("again");
    ok(&mvgsa(&[
        "gsa",
        "--config",
        s(&first.join("run.conf")),
        "--out",
        s(&again),
    ]));
    for f in ["indices.csv", "indices.json", "bars.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_are_usage_errors_with_line_numbers() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "n = 4\nthis line has no equals sign\n").unwrap();
    let o = mvgsa(&[
        "sample",
        "--config",
        s(&conf),
        "--evaluator",
        "direct:ishigami",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.conf:2"), "{}", stderr(&o));

    std::fs::write(&conf, "frobnicate = 1\n").unwrap();
    let o = mvgsa(&["sample", "--config", s(&conf), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("frobnicate"), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(mvgsa(&["--help"]).status.code(), Some(0));
    assert_eq!(mvgsa(&["sample", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        mvgsa(&["sample", "--evaluator", "direct:ishigami", "--n", "many"])
            .status
            .code(),
        Some(1)
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x_x2,t_t1,t_t3,y_1\n0.1,1,9,3.0\n").unwrap();
    let o = mvgsa(&[
        "fit",
        "--data",
        s(&bad),
        "--space",
        s(&data("mixed_ishigami_l5.space.json")),
        "--out",
        s(&dir.path().join("fit")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
