use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn destsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_destsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small nine-week log for one market.
fn small_log(dir: &Path, market: &str, seed: u64) -> PathBuf {
    let path = dir.join(format!("{market}.csv"));
    let seed = seed.to_string();
    let out = destsim(&[
        "generate",
        "--out",
        s(&path),
        "--users",
        "1500",
        "--destinations",
        "30",
        "--clusters",
        "3",
        "--seed",
        &seed,
        "--market",
        market,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == ext) {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

const TRAIN: [&str; 4] = ["--train-start", "2020-01-01", "--train-end", "2020-02-26"];
const TEST: [&str; 4] = ["--test-start", "2020-02-26", "--test-end", "2020-03-04"];

#[test]
fn generate_is_deterministic_and_reports_count() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = destsim(&[
            "generate",
            "--out",
            s(p),
            "--users",
            "300",
            "--destinations",
            "20",
            "--seed",
            "9",
        ]);
        assert_eq!(code(&out), 0);
        let rows = fs::read_to_string(p).unwrap().lines().count() - 1;
        assert_eq!(
            stdout(&out).trim(),
            format!("wrote {rows} records to {}", p.display())
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn generate_rejects_bad_ranges() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("x.csv");
    let out = destsim(&[
        "generate",
        "--out",
        s(&p),
        "--min-searches",
        "5",
        "--max-searches",
        "2",
    ]);
    assert_eq!(code(&out), 2);
    let out = destsim(&[
        "generate",
        "--out",
        s(&p),
        "--start",
        "2020-03-01",
        "--end",
        "2020-01-01",
    ]);
    assert_eq!(code(&out), 2);
    assert!(!p.exists());
}

#[test]
fn build_single_measure_writes_matrix_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 1);
    let out_dir = dir.path().join("out");
    let out = destsim(&[
        "build",
        "--input",
        s(&log),
        "--measures",
        "ccs",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        files_with_ext(&out_dir, "csv"),
        vec![out_dir.join("FR/ccs.csv")]
    );
    assert_eq!(
        files_with_ext(&out_dir, "json"),
        vec![out_dir.join("FR/ccs.json")]
    );

    let sidecar: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("FR/ccs.json")).unwrap()).unwrap();
    assert_eq!(sidecar["measure"], "ccs");
    assert_eq!(sidecar["market"], "FR");
    assert_eq!(sidecar["n"], 30);
    assert!(stdout(&out).contains("market=FR measure=ccs n=30"));
}

#[test]
fn build_five_markets_all_measures() {
    let dir = TempDir::new().unwrap();
    let markets = ["DE", "ES", "FR", "IT", "UK"];
    let logs: Vec<String> = markets
        .iter()
        .enumerate()
        .map(|(i, m)| s(&small_log(dir.path(), m, i as u64)).to_owned())
        .collect();
    let out_dir = dir.path().join("out");
    let out = destsim(&[
        "build",
        "--input",
        &logs.join(","),
        "--out",
        s(&out_dir),
        "--deterministic",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files_with_ext(&out_dir, "csv").len(), 35);
    assert_eq!(files_with_ext(&out_dir, "json").len(), 35);
    assert_eq!(stdout(&out).lines().count(), 35);

    // market filter
    let only = dir.path().join("only");
    let out = destsim(&[
        "build",
        "--input",
        &logs.join(","),
        "--market",
        "it",
        "--measures",
        "jaccard",
        "--out",
        s(&only),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        files_with_ext(&only, "csv"),
        vec![only.join("IT/jaccard.csv")]
    );
}

#[test]
fn missing_input_fails_without_output() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 1);
    let missing = dir.path().join("nope.csv");
    let out_dir = dir.path().join("out");
    let inputs = format!("{},{}", s(&log), s(&missing));
    let out = destsim(&["build", "--input", &inputs, "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
}

#[test]
fn recommend_from_built_matrix() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 3);
    let out_dir = dir.path().join("out");
    let out = destsim(&[
        "build",
        "--input",
        s(&log),
        "--measures",
        "pccs",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 0);
    let matrix = out_dir.join("FR/pccs_w0.5.csv");

    let out = destsim(&[
        "recommend",
        "--matrix",
        s(&matrix),
        "--searched",
        "D00",
        "--k",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let recs: Vec<Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(recs.len(), 5);
    assert!(recs.iter().all(|r| r["destination"] != "D00"));
    let ranks: Vec<u64> = recs.iter().map(|r| r["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, vec![1, 2, 3, 4, 5]);

    let everything: Vec<String> = (0..30).map(|r| format!("D{r:02}")).collect();
    let out = destsim(&[
        "recommend",
        "--matrix",
        s(&matrix),
        "--searched",
        &everything.join(","),
    ]);
    assert_eq!(code(&out), 0);
    let recs: Vec<Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(recs.is_empty());

    let out = destsim(&["recommend", "--matrix", s(&matrix), "--searched", "ZZZ"]);
    assert_eq!(code(&out), 3);

    let out = destsim(&[
        "recommend",
        "--matrix",
        s(&matrix),
        "--searched",
        "D00",
        "--k",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn evaluate_reports_every_measure_and_weight() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 5);
    let out_dir = dir.path().join("eval");
    let mut args = vec![
        "evaluate",
        "--input",
        s(&log),
        "--out",
        s(&out_dir),
        "--w",
        "0.1,0.5,0.9",
    ];
    args.extend(TRAIN);
    args.extend(TEST);
    let out = destsim(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert_eq!(
        header,
        "market,period,train_start,test_start,eligible_users,pearson,cosine,jaccard,kulsinski,ccs,ccs_norm,pccs_w0.1,pccs_w0.5,pccs_w0.9"
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("FR.json")).unwrap()).unwrap();
    let results = report["periods"][0]["results"].as_array().unwrap();
    assert_eq!(results.len(), 9);
    for r in results {
        let a = r["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }
    assert!(report["periods"][0]["eligible_users"].as_u64().unwrap() > 0);
    assert_eq!(report["ranks"].as_array().unwrap().len(), 9);
}

#[test]
fn evaluate_two_training_lengths() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 6);
    let mut train_starts = Vec::new();
    for (name, start) in [("long", "2020-01-01"), ("short", "2020-01-29")] {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "evaluate",
            "--input",
            s(&log),
            "--out",
            s(&out_dir),
            "--measures",
            "ccs,pearson",
        ];
        args.extend(["--train-start", start, "--train-end", "2020-02-26"]);
        args.extend(TEST);
        assert_eq!(code(&destsim(&args)), 0);
        let report: Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("FR.json")).unwrap()).unwrap();
        train_starts.push(report["periods"][0]["window"]["train_start"].clone());
        assert!(report["periods"][0]["n_train_users"].as_u64().unwrap() > 0);
    }
    assert_ne!(train_starts[0], train_starts[1]);
}

#[test]
fn evaluate_without_eligible_users_reports_null() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 7);
    let out_dir = dir.path().join("eval");
    let mut args = vec![
        "evaluate",
        "--input",
        s(&log),
        "--out",
        s(&out_dir),
        "--measures",
        "ccs,pearson",
    ];
    args.extend(TRAIN);
    args.extend(["--test-start", "2021-01-01", "--test-end", "2021-01-08"]);
    let out = destsim(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("FR.json")).unwrap()).unwrap();
    let period = &report["periods"][0];
    assert_eq!(period["eligible_users"], 0);
    for r in period["results"].as_array().unwrap() {
        assert!(r["accuracy"].is_null());
    }
}

#[test]
fn evaluate_rejects_unknown_measures_and_baselines() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 8);
    let out_dir = dir.path().join("eval");
    let mut args = vec![
        "evaluate",
        "--input",
        s(&log),
        "--out",
        s(&out_dir),
        "--measures",
        "ccs,dice",
    ];
    args.extend(TRAIN);
    args.extend(TEST);
    assert_eq!(code(&destsim(&args)), 3);

    let mut args = vec![
        "evaluate",
        "--input",
        s(&log),
        "--out",
        s(&out_dir),
        "--measures",
        "ccs",
        "--baseline",
        "pearson",
    ];
    args.extend(TRAIN);
    args.extend(TEST);
    assert_eq!(code(&destsim(&args)), 3);
    assert!(!out_dir.exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 2);
    let cfg = dir.path().join("run.toml");
    let out_dir = dir.path().join("from_config");
    fs::write(
        &cfg,
        format!(
            "input = \"{}\"\nout = \"{}\"\nmeasures = [\"ccs\", \"cosine\"]\nmin_support = 1\n",
            s(&log),
            s(&out_dir)
        ),
    )
    .unwrap();
    let out = destsim(&["build", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        files_with_ext(&out_dir, "csv"),
        vec![out_dir.join("FR/ccs.csv"), out_dir.join("FR/cosine.csv")]
    );

    let override_dir = dir.path().join("override");
    let out = destsim(&[
        "build",
        "--config",
        s(&cfg),
        "--measures",
        "jaccard",
        "--out",
        s(&override_dir),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        files_with_ext(&override_dir, "csv"),
        vec![override_dir.join("FR/jaccard.csv")]
    );
}

#[test]
fn inputs_are_left_untouched() {
    let dir = TempDir::new().unwrap();
    let log = small_log(dir.path(), "FR", 4);
    let before = fs::read(&log).unwrap();
    let mut args = vec![
        "evaluate",
        "--input",
        s(&log),
        "--out",
        dir.path().to_str().unwrap(),
        "--measures",
        "ccs",
    ];
    args.extend(["--baseline", "ccs"]);
    args.extend(TRAIN);
    args.extend(TEST);
    assert_eq!(code(&destsim(&args)), 0);
    let out = destsim(&[
        "build",
        "--input",
        s(&log),
        "--out",
        s(&dir.path().join("b")),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&log).unwrap(), before);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&destsim(&["frobnicate"])), 2);
    assert_eq!(code(&destsim(&["build"])), 2);
}
