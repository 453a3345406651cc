use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use liqcast::eval::run_experiment;
use liqcast::run::RunConfig;

fn sample_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/xrp_usdt_daily_sample.csv").canonicalize().unwrap()
}

/// Config with small model budgets so every command finishes quickly.
fn write_config(dir: &Path, families: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 7
output_dir = "out"
families = [{families}]

[data]
path = "{}"

[models.rf]
n_trees = 10

[models.xgb]
n_rounds = 30

[models.lstm]
epochs = 2
{extra}"#,
        sample_csv().display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn liqcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liqcast")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Value {
    let out = liqcast(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_else(|| panic!("no stderr"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not json ({e}): {text}"))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_writes_canonical_candles_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear""#, "");
    let summary = run_ok(&["ingest", "-c", s(&cfg)]);
    assert_eq!(summary["bars_written"], 1826, "{summary}");
    let out = tmp.path().join("out");
    let csv = fs::read_to_string(out.join("candles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1827);
    let m = manifest(&out);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["command"], "ingest");
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "candles.csv"));
    assert!(m["input_hash"].is_string() && m["config_hash"].is_string());
}

#[test]
fn missing_input_file_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = liqcast(&["ingest", "--input", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "data");
    assert!(rec["error"]["path"].as_str().unwrap().ends_with("nope.csv"), "{rec}");
}

#[test]
fn stats_flags_right_skew_on_close_and_volume() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear""#, "");
    run_ok(&["stats", "-c", s(&cfg)]);
    let stats: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/stats.json")).unwrap()).unwrap();
    for name in ["close", "volume_base"] {
        let f = stats["fields"].as_array().unwrap().iter().find(|f| f["field"] == name).unwrap();
        assert_eq!(f["right_skewed"], true, "{name}: {f}");
    }
    assert!(tmp.path().join("out/stats_histograms.csv").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear""#, "hiden_size = 4\n");
    let out = liqcast(&["train", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out)["error"]["message"].as_str().unwrap().contains("hiden_size"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = liqcast(&["train", "--families", "gru"]);
    assert_eq!(out.status.code(), Some(1));
    let out = liqcast(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn held_lock_rejects_a_second_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear""#, "");
    let out_dir = tmp.path().join("out");
    fs::create_dir_all(&out_dir).unwrap();
    fs::write(out_dir.join(".liqcast.lock"), "other").unwrap();
    let out = liqcast(&["train", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out)["error"]["message"].as_str().unwrap().contains("lock"));
    assert!(!out_dir.join("models").exists());
}

#[test]
fn train_evaluate_predict_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), r#""linear", "xgb", "lstm""#, "");
    let out = tmp.path().join("out");
    run_ok(&["features", "-c", s(&cfg_path)]);
    run_ok(&["train", "-c", s(&cfg_path)]);
    for key in ["linear", "xgb", "lstm"] {
        assert!(out.join(format!("models/{key}.json")).exists());
    }
    assert!(out.join("loss/lstm.csv").exists());
    assert_eq!(manifest(&out)["command"], "train");
    run_ok(&["evaluate", "-c", s(&cfg_path)]);
    assert!(out.join("evaluation_table.txt").exists());

    // In-process reference for the same config.
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let (series, _) = cfg.load_series().unwrap();
    let reference = run_experiment(&series, &cfg.experiment()).unwrap();

    for run in &reference.runs {
        let key = run.family.key();
        let pred_dir = tmp.path().join(format!("pred-{key}"));
        run_ok(&[
            "predict",
            "-c",
            s(&cfg_path),
            "--model",
            s(&out.join(format!("models/{key}.json"))),
            "--features",
            s(&out.join("features.csv")),
            "--out",
            s(&pred_dir),
        ]);
        let cli: Vec<(String, f64)> = fs::read_to_string(pred_dir.join("predictions.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].to_string(), f[2].parse().unwrap())
            })
            .collect();
        let inproc = run.predictions.as_ref().unwrap();
        let w = run.model.as_ref().unwrap().window_length;
        let mut matched = 0;
        // Rows whose full window lies inside the test block see identical inputs.
        for (t, p) in inproc.timestamps.iter().zip(&inproc.predicted).skip(w) {
            let stamp = liqcast::market_data::format_timestamp(t);
            let (_, q) = cli.iter().find(|(ts, _)| *ts == stamp).unwrap_or_else(|| panic!("{key}: no {stamp}"));
            assert_eq!(p.to_bits(), q.to_bits(), "{key} at {stamp}");
            matched += 1;
        }
        assert!(matched > 100, "{key}: {matched}");
    }
}

#[test]
fn predict_rejects_mismatched_features_and_tampered_models() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear""#, "");
    let out = tmp.path().join("out");
    run_ok(&["train", "-c", s(&cfg)]);
    let off = tmp.path().join("off");
    run_ok(&["features", "-c", s(&cfg), "--no-liquidity", "--out", s(&off)]);
    let model = out.join("models/linear.json");

    let res = liqcast(&["predict", "--model", s(&model), "--features", s(&off.join("features.csv")), "--out", s(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));
    assert!(error_record(&res)["error"]["message"].as_str().unwrap().contains("schema"));

    let text = fs::read_to_string(&model).unwrap();
    let pos = text.find("\"weights\"").unwrap();
    let digit = text[pos..].find(|c: char| c.is_ascii_digit()).unwrap() + pos;
    let mut bytes = text.into_bytes();
    bytes[digit] = if bytes[digit] == b'9' { b'8' } else { bytes[digit] + 1 };
    fs::write(&model, bytes).unwrap();
    run_ok(&["features", "-c", s(&cfg)]);
    let res = liqcast(&["predict", "--model", s(&model), "--features", s(&out.join("features.csv")), "--out", s(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));
    assert!(error_record(&res)["error"]["message"].as_str().unwrap().contains("checksum"));
}

#[test]
fn ablate_is_table_shaped_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#""linear", "rf", "xgb", "lstm""#, "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["ablate", "-c", s(&cfg), "--out", s(&a)]);
    run_ok(&["ablate", "-c", s(&cfg), "--out", s(&b)]);

    let table = fs::read_to_string(a.join("ablation_table.txt")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    let header: Vec<&str> = lines[0].split(" | ").map(str::trim).collect();
    assert_eq!(header, ["Model", "Liquidity Features", "MAE", "MSE", "R² Score"]);
    assert_eq!(lines.len(), 10, "{table}");
    assert!(fs::read_to_string(a.join("ablation_table.csv")).unwrap().lines().count() == 9);

    for file in ["ablation.json", "ablation_table.txt", "ablation_table.csv", "predictions/lstm_with_liquidity.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
    assert_eq!(manifest(&a)["input_hash"], manifest(&b)["input_hash"]);

    run_ok(&["export-plots", "-c", s(&cfg), "--from", s(&a), "--out", s(&a)]);
    assert!(a.join("plots/metrics_comparison.csv").exists());
    assert!(a.join("plots/price_volume.csv").exists());
    assert!(a.join("plots/loss_lstm_with_liquidity.csv").exists());
}
