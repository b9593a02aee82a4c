use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hlspower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlspower")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hlspower(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fails(args: &[&str]) -> String {
    let out = hlspower(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "error must be one line: {err:?}");
    assert!(err.starts_with("hlspower: "), "{err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small depth-1 benchmark: 32 configurations per application.
fn bench(dir: &Path, apps: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("bench{seed}-{apps}"));
    ok(&["gen", "--out", s(&out), "--apps", &apps.to_string(), "--seed", &seed.to_string(), "--depth", "1", "--frames", "2"]);
    out
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for app in fs::read_dir(dir).unwrap() {
        let path = app.unwrap().path();
        if path.is_dir() {
            for f in fs::read_dir(&path).unwrap() {
                let f = f.unwrap().path();
                out.push((f.strip_prefix(dir).unwrap().display().to_string(), fs::read(&f).unwrap()));
            }
        } else {
            out.push((path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn gen_is_reproducible() {
    let t = TempDir::new().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    for d in [&a, &b] {
        ok(&["gen", "--out", s(d), "--apps", "2", "--seed", "7", "--depth", "1", "--frames", "2"]);
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
    assert!(fs::read_to_string(a.join("manifest.json")).unwrap().contains("synth8"));
}

#[test]
fn gen_zero_apps_writes_empty_manifest() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("empty");
    ok(&["gen", "--out", s(&out), "--apps", "0"]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["applications"], serde_json::json!([]));
}

#[test]
fn gen_into_unwritable_location_fails() {
    let t = TempDir::new().unwrap();
    let file = t.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let err = fails(&["gen", "--out", s(&file.join("sub")), "--apps", "1", "--depth", "1"]);
    assert!(err.starts_with("hlspower: IoFailure: "), "{err}");
}

#[test]
fn featurize_baseline_only_application() {
    let t = TempDir::new().unwrap();
    let dir = bench(t.path(), 1, 3);
    let path = dir.join("manifest.json");
    let mut manifest: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let app = &mut manifest["applications"][0];
    let base = app["base_point"].clone();
    let points = app["points"].as_array().unwrap().iter().filter(|p| p["point_id"] == base).cloned().collect();
    app["points"] = serde_json::Value::Array(points);
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();

    let out = t.path().join("f.csv");
    ok(&["featurize", "--bench", s(&dir), "--out", s(&out)]);
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 2);
    let header = &rows[0];
    for sf in ["sf_lut", "sf_ff", "sf_dsp", "sf_bram", "sf_latency"] {
        let col = header.iter().position(|h| h == sf).unwrap_or_else(|| panic!("missing {sf} in {header:?}"));
        assert_eq!(rows[1][col], "1");
    }
}

#[test]
fn featurize_names_corrupted_descriptor() {
    let t = TempDir::new().unwrap();
    let dir = bench(t.path(), 1, 4);
    let victim = dir.join("synth4").join("p2-l1-u4.json");
    fs::write(&victim, "{ not json").unwrap();
    let err = fails(&["featurize", "--bench", s(&dir), "--out", s(&t.path().join("f.csv"))]);
    assert!(err.contains("p2-l1-u4.json"), "{err}");
    assert!(err.contains("MalformedDocument"), "{err}");
}

#[test]
fn featurize_is_reproducible_across_worker_counts() {
    let t = TempDir::new().unwrap();
    let dir = bench(t.path(), 2, 5);
    let one = t.path().join("one.csv");
    let many = t.path().join("many.csv");
    ok(&["--jobs", "1", "featurize", "--bench", s(&dir), "--out", s(&one)]);
    ok(&["--jobs", "3", "featurize", "--bench", s(&dir), "--out", s(&many)]);
    let bytes = fs::read(&one).unwrap();
    assert_eq!(bytes, fs::read(&many).unwrap());
    let rows = read_csv(&one);
    assert_eq!(rows.len(), 1 + 64);
    let keys: Vec<_> = rows[1..].iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

fn features(t: &TempDir, apps: usize, seed: u64) -> PathBuf {
    let dir = bench(t.path(), apps, seed);
    let out = t.path().join(format!("f{seed}-{apps}.csv"));
    ok(&["featurize", "--bench", s(&dir), "--out", s(&out)]);
    out
}

#[test]
fn train_cannot_hold_out_the_only_application() {
    let t = TempDir::new().unwrap();
    let f = features(&t, 1, 11);
    let err = fails(&["train", "--features", s(&f), "--model", "linear", "--holdout", "1", "--out", s(&t.path().join("m"))]);
    assert!(err.starts_with("hlspower: CannotHoldOut: "), "{err}");
}

#[test]
fn train_reports_each_held_out_app_and_overall() {
    let t = TempDir::new().unwrap();
    let f = features(&t, 4, 20);
    let out = t.path().join("m");
    ok(&[
        "train", "--features", s(&f), "--model", "lasso", "--lambda", "10", "--folds", "3", "--holdout", "2", "--seed", "1",
        "--out", s(&out),
    ]);
    let report = read_csv(&out.join("cv_report.csv"));
    assert_eq!(report[0], ["app", "rows", "mae_percent"]);
    assert_eq!(report.len() - 1, 2 + 1);
    assert_eq!(report.last().unwrap()[0], "overall");
    assert_eq!(report.last().unwrap()[1], "64");
    let grid = read_csv(&out.join("cv_grid.csv"));
    assert_eq!(grid.len(), 2);
    assert_eq!(grid[1][3], "true");
    assert!(grid[1][1].contains("\"lambda\":10.0"), "{:?}", grid[1]);

    let again = t.path().join("m2");
    ok(&[
        "train", "--features", s(&f), "--model", "lasso", "--lambda", "10", "--folds", "3", "--holdout", "2", "--seed", "1",
        "--out", s(&again),
    ]);
    for file in ["model.json", "cv_report.csv", "cv_grid.csv"] {
        assert_eq!(fs::read(out.join(file)).unwrap(), fs::read(again.join(file)).unwrap(), "{file}");
    }

    let preds = t.path().join("p.csv");
    ok(&["predict", "--model-file", s(&out.join("model.json")), "--features", s(&f), "--out", s(&preds)]);
    let rows = read_csv(&preds);
    assert_eq!(rows.len(), 1 + 128);
    assert!(rows[1..].iter().all(|r| r[2].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn dse_curve_is_ascending_and_exhaustive_budget_is_exact() {
    let t = TempDir::new().unwrap();
    let train_dir = bench(t.path(), 3, 30);
    let f = t.path().join("f.csv");
    ok(&["featurize", "--bench", s(&train_dir), "--out", s(&f)]);
    let model = t.path().join("m");
    ok(&["train", "--features", s(&f), "--model", "cart", "--max-depth", "4", "--folds", "2", "--holdout", "0", "--out", s(&model)]);
    assert_eq!(read_csv(&model.join("cv_report.csv")).len(), 2);

    let test_dir = bench(t.path(), 2, 40);
    let run = |out: &Path| {
        ok(&[
            "dse", "--model-file", s(&model.join("model.json")), "--bench", s(&test_dir), "--initial-rate", "0.1",
            "--budget", "1.0,0.2,0.5", "--out", s(out),
        ]);
    };
    let a = t.path().join("d1");
    let b = t.path().join("d2");
    run(&a);
    run(&b);
    for file in ["pareto.csv", "adrs_curve.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let curve = read_csv(&a.join("adrs_curve.csv"));
    let budgets: Vec<f64> = curve[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(budgets.windows(2).all(|w| w[0] <= w[1]), "{budgets:?}");
    let last = curve.last().unwrap();
    assert_eq!(last[1], "1");
    assert_eq!(last[5].parse::<f64>().unwrap(), 0.0);
    for row in &curve[1..] {
        if row[1] == "1" {
            assert_eq!(row[2], row[3], "exhaustive budget evaluates every pruned point");
        }
    }
    let pareto = read_csv(&a.join("pareto.csv"));
    assert_eq!(pareto[0][..4], ["app", "budget", "point_id", "latency_cycles"]);
    assert!(pareto.len() > 1);
}

#[test]
fn dse_rejects_budget_below_initial_rate() {
    let t = TempDir::new().unwrap();
    let f = features(&t, 2, 50);
    let model = t.path().join("m");
    ok(&["train", "--features", s(&f), "--model", "linear", "--folds", "2", "--holdout", "0", "--out", s(&model)]);
    let err = fails(&[
        "dse", "--model-file", s(&model.join("model.json")), "--bench", s(&t.path().join("bench50-2")), "--initial-rate", "0.5",
        "--budget", "0.2", "--out", s(&t.path().join("d")),
    ]);
    assert!(err.starts_with("hlspower: InvalidConfig: "), "{err}");
}
