use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fpgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpgan")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by a signal")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn convert_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("powed.csv");
    let o = fpgan(&["convert", s(&data("three_rows.csv")), s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = std::fs::read_to_string(&out).unwrap();
    assert_eq!(got, std::fs::read_to_string(data("three_rows_powed.csv")).unwrap());

    // The weakest detected reading (-90) is the minimum.
    let powed = |r: f64| ((r + 90.0) / 90.0f64).powf(std::f64::consts::E);
    let want = [[powed(-40.0), powed(-80.0), 0.0], [0.0, powed(-60.0), 0.0], [powed(-70.0), 0.0, powed(-50.0)]];
    for (line, w) in got.lines().skip(1).zip(want) {
        let cells: Vec<f64> = line.split(',').take(3).map(|c| c.parse().unwrap()).collect();
        for (c, w) in cells.iter().zip(w) {
            assert!((c - w).abs() < 1e-15, "{c} vs {w}");
        }
    }
}

#[test]
fn convert_test_split_uses_the_reference_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let test = dir.path().join("test.csv");
    std::fs::write(&test, "AP001,AP002,AP003,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n-95,-45,100,0,0,0,0\n").unwrap();
    let out = dir.path().join("p.csv");
    let o = fpgan(&["convert", s(&test), s(&out), "--reference", s(&data("three_rows.csv"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let cells: Vec<f64> = text.lines().nth(1).unwrap().split(',').take(2).map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[0], 0.0);
    assert!((cells[1] - 0.5f64.powf(std::f64::consts::E)).abs() < 1e-15);
}

#[test]
fn uji_shaped_header_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mut header: Vec<String> = (1..=520).map(|i| format!("WAP{i:03}")).collect();
    header.extend(["LONGITUDE", "LATITUDE", "FLOOR", "BUILDINGID", "SPACEID", "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"].map(String::from));
    let mut row: Vec<String> = (0..520).map(|i| if i % 7 == 0 { "-70".into() } else { "100".into() }).collect();
    row.extend(["-7600.5", "4864900.25", "2", "1", "106", "2", "2", "23", "1371713733"].map(String::from));
    let csv = dir.path().join("uji.csv");
    std::fs::write(&csv, format!("{}\n{}\n{}\n", header.join(","), row.join(","), row.join(",").replacen("-70", "-80", 1))).unwrap();
    let schema = dir.path().join("schema.json");
    std::fs::write(
        &schema,
        r#"{"ap_prefix": "WAP", "n_aps": 520, "ignore_columns": ["SPACEID", "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"]}"#,
    )
    .unwrap();
    let out = dir.path().join("p.csv");
    let o = fpgan(&["convert", s(&csv), s(&out), "--schema", s(&schema)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').filter(|c| c.starts_with("WAP")).count(), 520);
}

#[test]
fn schema_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "AP001,AP002,LATITUDE,FLOOR,BUILDINGID\n-40,-50,1,0,0\n").unwrap();
    let o = fpgan(&["convert", s(&csv), s(&dir.path().join("p.csv"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn corrupt_cell_exits_3_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "AP001,AP002,LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n-40,-50,1,1,0,0\n-40,abc,1,1,0,0\n").unwrap();
    let o = fpgan(&["convert", s(&csv), s(&dir.path().join("p.csv"))]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("AP002"), "{err}");
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = fpgan(&["convert", s(&dir.path().join("nope.csv")), s(&dir.path().join("p.csv"))]);
    assert_eq!(code(&o), 1);
}

const SMALL_SYNTH: &str = r#"{"n_aps": 6, "floors": 2, "area": [12.0, 10.0], "train_points": 80, "test_points": 20, "seed": 11}"#;

/// Quick settings: a handful of epochs for every network.
fn small_config(dir: &Path, method: &str) -> PathBuf {
    let net = |lr: f64| format!(r#"{{"learning_rate": {lr}, "epochs": 4, "batch_size": 16, "patience": null, "validation_fraction": 0.1}}"#);
    let cfg = format!(
        r#"{{
  "train": "fixture/train.csv",
  "test": "fixture/test.csv",
  "dataset_name": "small",
  "positioning": {{"position": {p}, "floor": {f}, "building": {f}}},
  "cgan": {{"method": "{method}", "epochs": 2, "batch_size": 16}},
  "selection": {{"candidates_per_iteration": 40, "iterations": 2}},
  "seed": 5
}}
"#,
        p = net(0.005),
        f = net(0.005),
    );
    let path = dir.join("config.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn synth(dir: &Path, cfg: &str) {
    let sc = dir.join("synth.json");
    std::fs::write(&sc, cfg).unwrap();
    let o = fpgan(&["synth", s(&dir.join("fixture")), "--config", s(&sc)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn pipeline(dir: &Path) -> String {
    synth(dir, SMALL_SYNTH);
    let cfg = small_config(dir, "M2");
    for stage in ["train", "augment", "evaluate"] {
        let o = fpgan(&[stage, "--config", s(&cfg)]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    std::fs::read_to_string(dir.join("out/report.json")).unwrap()
}

#[test]
fn small_pipeline_runs_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let report = pipeline(a.path());
    assert_eq!(report, pipeline(b.path()));
    let out = a.path().join("out");
    for f in ["bundle/bundle.json", "augmented.csv", "selection.json", "report.txt", "manifest.json", "history/position.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    let names: Vec<&str> = parsed["systems"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["1-NN", "CNN-LSTM", "CNN-LSTM+cGAN-M2"]);
    assert_eq!(parsed["systems"][0]["norm_2d"], 1.0);
    let header = std::fs::read_to_string(out.join("augmented.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.ends_with("SOURCE,CONDLABEL,SEEDIDX,DIST"), "{header}");

    // Export keeps every row; filters select a subset in file order.
    let coords = a.path().join("coords.csv");
    let o = fpgan(&["export-coords", s(&out.join("augmented.csv")), s(&coords)]);
    assert_eq!(code(&o), 0);
    let all = std::fs::read_to_string(&coords).unwrap();
    let aug_rows = std::fs::read_to_string(out.join("augmented.csv")).unwrap().lines().count() - 1;
    assert_eq!(all.lines().count() - 1, aug_rows);
    let real = all.lines().filter(|l| l.ends_with(",real")).count();
    assert_eq!(real, 80);
    let o = fpgan(&["export-coords", s(&out.join("augmented.csv")), s(&coords), "--building", "0", "--floor", "1"]);
    assert_eq!(code(&o), 0);
    let sub = std::fs::read_to_string(&coords).unwrap();
    assert!(sub.lines().skip(1).all(|l| l.split(',').nth(2) == Some("1") && l.split(',').nth(3) == Some("0")));
    let expected: Vec<&str> = all.lines().skip(1).filter(|l| l.split(',').nth(2) == Some("1")).collect();
    assert_eq!(sub.lines().skip(1).collect::<Vec<_>>(), expected);

    // Merging a report with itself averages to the same values.
    let merged = a.path().join("merged");
    let rj = out.join("report.json");
    let o = fpgan(&["evaluate", "--merge", s(&rj), s(&rj), "--merge-out", s(&merged)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(merged.join("merged.txt")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("Avg.")), "{table}");
}

#[test]
fn m1_on_single_building_data_exits_2_before_training() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), SMALL_SYNTH);
    let cfg = small_config(dir.path(), "M1");
    let o = fpgan(&["augment", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("out/cgan").exists());
}

#[test]
fn empty_test_split_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), SMALL_SYNTH);
    let test = dir.path().join("fixture/test.csv");
    let header = std::fs::read_to_string(&test).unwrap().lines().next().unwrap().to_string();
    std::fs::write(&test, header + "\n").unwrap();
    let cfg = small_config(dir.path(), "M2");
    let o = fpgan(&["evaluate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 6, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"train": "x.csv", "epochz": 3}"#).unwrap();
    let o = fpgan(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}
