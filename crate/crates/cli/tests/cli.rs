use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn drtsoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drtsoh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = drtsoh(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path -> bytes for every file under `dir`.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(dir, dir, &mut acc);
    acc.sort();
    acc
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--out", s(&data), "--seed", "7"];
    args.extend_from_slice(extra);
    ok(&args);
    data
}

const TRAIN_FLAGS: [&str; 8] = ["--epochs", "8", "--hidden", "6,5,4", "--fc", "4,3,1", "--lambda", "1e-3"];

#[test]
fn synth_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("nested/a");
    let b = dir.path().join("b");
    let out = ok(&["synth", "--out", s(&a), "--seed", "3"]);
    ok(&["synth", "--out", s(&b), "--seed", "3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("22 cells, 550 spectra"));
    let spectra = fs::read_dir(a.join("spectra")).unwrap().count();
    assert_eq!(spectra, 22 * 25);
    assert_eq!(snapshot(&a), snapshot(&b));

    let c = dir.path().join("c");
    ok(&["synth", "--out", s(&c), "--seed", "4"]);
    assert_ne!(fs::read(a.join("manifest.json")).unwrap(), fs::read(c.join("manifest.json")).unwrap());
}

#[test]
fn drt_is_deterministic_and_records_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let spec = data.join("spectra/S03_d020_soc050.csv");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let lc = dir.path().join("lc");
    ok(&["drt", s(&spec), "--out", s(&a), "--lcurve-out", s(&lc)]);
    ok(&["drt", s(&spec), "--out", s(&b), "--lcurve-out", s(&lc)]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert!(lc.join("S03_d020_soc050_lcurve.csv").is_file());

    let fixed = dir.path().join("fixed");
    ok(&["drt", s(&spec), "--out", s(&fixed), "--lambda", "1e-3"]);
    let side: Value = serde_json::from_slice(&fs::read(fixed.join("S03_d020_soc050.json")).unwrap()).unwrap();
    assert_eq!(side["lambda"].as_f64(), Some(1e-3));
    assert_eq!(side["lambda_source"], "fixed");
}

#[test]
fn noiseless_rp_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &["--noise", "0"]);
    let out = dir.path().join("drt");
    ok(&["drt", s(&data), "--out", s(&out), "--soc", "25"]);
    let mut n = 0;
    for e in fs::read_dir(&out).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let side: Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
            let (rp, truth) = (side["rp_ohm"].as_f64().unwrap(), side["truth_rp_ohm"].as_f64().unwrap());
            assert!((rp - truth).abs() / truth < 1e-3, "{}: {rp} vs {truth}", p.display());
            n += 1;
        }
    }
    assert_eq!(n, 22 * 5);
}

#[test]
fn malformed_csv_is_a_data_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "freq_hz,z_real_ohm,z_imag_ohm\n100,0.02,-0.001\n10,oops,-0.002\n").unwrap();
    let out = drtsoh(&["drt", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv:3:"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(drtsoh(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(drtsoh(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = drtsoh(&["drt", s(&dir.path().join("missing.csv")), "--out", s(dir.path())]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn eval_requires_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let out = drtsoh(&["eval", "--data", s(&data), "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    let out = drtsoh(&["eval", "--data", s(&data), "--checkpoint", s(&missing), "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_and_eval_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let run = |tag: &str| {
        let tr = dir.path().join(format!("train_{tag}"));
        let ev = dir.path().join(format!("eval_{tag}"));
        let mut args = vec!["train", "--data", s(&data), "--out", s(&tr), "--seed", "5"];
        args.extend_from_slice(&TRAIN_FLAGS);
        ok(&args);
        let ck = tr.join("checkpoint.json");
        ok(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(&ev)]);
        (snapshot(&tr), snapshot(&ev), ev)
    };
    let (t1, e1, ev) = run("a");
    let (t2, e2, _) = run("b");
    assert_eq!(t1, t2);
    assert_eq!(e1, e2);

    let history = fs::read_to_string(dir.path().join("train_a/history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,train_mse,val_mse,lr"));
    assert_eq!(history.lines().count(), 1 + 8);

    let results = fs::read_to_string(ev.join("results.csv")).unwrap();
    let rows: Vec<&str> = results.lines().collect();
    assert_eq!(rows[0], "category,set,model,rmse_ah,rmspe_pct");
    assert!(rows[1].starts_with("balanced,1,lstm,") && rows[2].starts_with("balanced,1,linreg,"));

    // 4 balanced test cells, 5 checkups each, two models.
    let traj = fs::read_to_string(ev.join("trajectories.csv")).unwrap();
    let lstm: Vec<Vec<&str>> = traj
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|r| r[2] == "lstm")
        .collect();
    assert_eq!(lstm.len(), 4 * 5);
    let mut cells: Vec<&str> = lstm.iter().map(|r| r[3]).collect();
    cells.dedup();
    assert_eq!(cells.len(), 4);
    for c in cells {
        let days: Vec<&str> = lstm.iter().filter(|r| r[3] == c).map(|r| r[4]).collect();
        assert_eq!(days, ["0", "10", "20", "40", "90"]);
    }
}

#[test]
fn config_file_sets_flags_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"epochs": 3, "hidden": [3, 3, 3], "fc": [2, 2, 1], "lambda": 0.001, "split": "random", "k": 5}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&a)]);
    let ck: Value = serde_json::from_slice(&fs::read(a.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ck["train_config"]["max_epochs"], 3);
    assert_eq!(ck["split"]["test_cell_ids"].as_array().unwrap().len(), 5);

    let b = dir.path().join("b");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&b), "--epochs", "2"]);
    let ck: Value = serde_json::from_slice(&fs::read(b.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ck["train_config"]["max_epochs"], 2);

    fs::write(&cfg, r#"{"not_a_flag": 1}"#).unwrap();
    let out = drtsoh(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&b)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plotdata_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.svg");
    let out = ok(&["plotdata", "--out", s(&empty)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let svg = fs::read_to_string(&empty).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("<polyline"));

    let data = synth(dir.path(), &[]);
    let spec = data.join("spectra/S10_d090_soc025.csv");
    let drt = dir.path().join("drt");
    ok(&["drt", s(&spec), "--out", s(&drt), "--lambda", "1e-4"]);
    let table = drt.join("S10_d090_soc025.csv");

    let csv = dir.path().join("one.csv");
    ok(&["plotdata", s(&table), "--format", "csv", "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    let names: std::collections::BTreeSet<&str> =
        text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names.len(), 1);

    let svg_path = dir.path().join("one.svg");
    ok(&["plotdata", s(&table), "--out", s(&svg_path)]);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    let attr = |k: &str| -> f64 {
        let i = svg.find(&format!("{k}=\"")).unwrap() + k.len() + 2;
        svg[i..i + svg[i..].find('"').unwrap()].parse().unwrap()
    };
    let lx: Vec<f64> = rows.iter().map(|r| r[0].log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let lo = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(attr("data-x-min") <= lo(&lx) && attr("data-x-max") >= hi(&lx));
    assert!(attr("data-y-min") <= lo(&ys) && attr("data-y-max") >= hi(&ys));

    let again = dir.path().join("again.svg");
    ok(&["plotdata", s(&table), "--out", s(&again)]);
    assert_eq!(fs::read(&svg_path).unwrap(), fs::read(&again).unwrap());
}
