use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use liqcast::dataset::{make_windows, Block, DatasetBundle};
use liqcast::eval::{
    evaluate_with_hash, render_table, run_ablation, run_experiment, table_rows, EvalReport, FamilyRun,
    PredictionSeries, TableRow,
};
use liqcast::features::{build_feature_matrix, write_feature_csv, FeatureSchema, TARGET_COLUMN};
use liqcast::fsutil::{read_to_string, write_atomic, write_json_atomic, DirLock};
use liqcast::market_data::{fill_gaps, format_timestamp, load_candles, summarize, write_canonical_csv, CandleSeries};
use liqcast::models::persist::{load_model, save_model, ModelPayload, FORMAT_VERSION};
use liqcast::models::{EpochLoss, Family, Regressor};
use liqcast::run::{RunConfig, RunManifest};
use liqcast::{Error, Result};

use crate::GlobalArgs;

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn new(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(fams) = &args.families {
            cfg.families = fams.iter().map(|f| f.parse()).collect::<Result<Vec<Family>>>()?;
        }
        if args.no_liquidity {
            cfg.features.include_liquidity = false;
        }
        cfg.experiment().validate()?;
        let out = match &args.out {
            Some(o) => o.clone(),
            None => cfg.output_path(),
        };
        Ok(Ctx { cfg, out })
    }

    fn series(&self, input: Option<PathBuf>) -> Result<CandleSeries> {
        Ok(self.ingest(input)?.0)
    }

    fn ingest(&self, input: Option<PathBuf>) -> Result<(CandleSeries, liqcast::market_data::IngestReport, PathBuf)> {
        let path = input.unwrap_or_else(|| self.cfg.data_path());
        let (raw, report) = load_candles(&path, &self.cfg.data.schema)?;
        Ok((fill_gaps(&raw, self.cfg.data.gap_policy)?, report, path))
    }

    fn input_hash(&self, input: Option<&Path>) -> Result<String> {
        let path = input.map(Path::to_path_buf).unwrap_or_else(|| self.cfg.data_path());
        let bytes = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        Ok(liqcast::hashing::bytes_hash(&bytes))
    }
}

/// Output sink that records every file in the run manifest.
struct Outputs<'a> {
    dir: &'a Path,
    manifest: &'a mut RunManifest,
}

impl Outputs<'_> {
    fn text(&mut self, rel: &str, content: &str) -> Result<()> {
        write_atomic(&self.dir.join(rel), content.as_bytes())?;
        self.manifest.record(rel);
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        write_json_atomic(&self.dir.join(rel), value)?;
        self.manifest.record(rel);
        Ok(())
    }
}

/// Locks the output directory, brackets `body` with the run manifest and
/// releases the lock.
fn with_run<F>(ctx: &Ctx, command: &str, input_hash: Option<String>, body: F) -> Result<Value>
where
    F: FnOnce(&mut Outputs) -> Result<Value>,
{
    let _lock = DirLock::acquire(&ctx.out)?;
    let mut manifest = RunManifest::begin(&ctx.out, command, Some(ctx.cfg.hash()), input_hash)?;
    let mut outputs = Outputs {
        dir: &ctx.out,
        manifest: &mut manifest,
    };
    let result = body(&mut outputs);
    manifest.finish(&ctx.out, result.as_ref().map(|_| ()))?;
    result
}

fn csv_string<F>(header: &[&str], rows: usize, mut row: F) -> String
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..rows {
        s.push_str(&row(i).join(","));
        s.push('\n');
    }
    s
}

fn loss_csv(history: &[EpochLoss]) -> String {
    csv_string(&["epoch", "train_mse", "val_mse"], history.len(), |i| {
        let e = &history[i];
        vec![e.epoch.to_string(), e.train_mse.to_string(), e.val_mse.to_string()]
    })
}

fn table_csv(rows: &[TableRow]) -> String {
    csv_string(&["model", "liquidity_features", "mae", "mse", "r2"], rows.len(), |i| {
        let r = &rows[i];
        vec![
            format!("\"{}\"", r.model),
            format!("\"{}\"", r.liquidity_features),
            r.mae.clone(),
            r.mse.clone(),
            r.r2.clone(),
        ]
    })
}

fn arm_label(liquidity: bool) -> &'static str {
    if liquidity {
        "with_liquidity"
    } else {
        "without_liquidity"
    }
}

pub fn ingest(args: &GlobalArgs, input: Option<PathBuf>) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let (series, report, path) = ctx.ingest(input)?;
    let hash = ctx.input_hash(Some(&path))?;
    with_run(&ctx, "ingest", Some(hash), |out| {
        let mut buf = Vec::new();
        write_canonical_csv(&series, &mut buf)?;
        out.text("candles.csv", std::str::from_utf8(&buf).expect("utf-8 csv"))?;
        let record = json!({
            "input": path.display().to_string(),
            "symbol": series.symbol,
            "interval_secs": series.interval_secs,
            "bars_written": series.len(),
            "gap_policy": ctx.cfg.data.gap_policy,
            "report": report,
        });
        out.json("ingest_report.json", &record)?;
        Ok(record)
    })
}

pub fn stats(args: &GlobalArgs, input: Option<PathBuf>, bins: usize) -> Result<Value> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    let ctx = Ctx::new(args)?;
    let (series, _, path) = ctx.ingest(input)?;
    let hash = ctx.input_hash(Some(&path))?;
    let summary = summarize(&series, bins)?;
    with_run(&ctx, "stats", Some(hash), |out| {
        out.json("stats.json", &summary)?;
        let mut hist = String::from("field,bin_low,bin_high,count\n");
        for f in &summary.fields {
            for (k, c) in f.histogram.counts.iter().enumerate() {
                hist.push_str(&format!("{},{},{},{}\n", f.field, f.histogram.edges[k], f.histogram.edges[k + 1], c));
            }
        }
        out.text("stats_histograms.csv", &hist)?;
        let flags: Vec<Value> = summary
            .fields
            .iter()
            .map(|f| json!({"field": f.field, "skewness": f.skewness, "right_skewed": f.right_skewed}))
            .collect();
        Ok(json!({"bars": summary.bars, "fields": flags}))
    })
}

pub fn features(args: &GlobalArgs, input: Option<PathBuf>) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let (series, _, path) = ctx.ingest(input)?;
    let hash = ctx.input_hash(Some(&path))?;
    let matrix = build_feature_matrix(&series, &ctx.cfg.features)?;
    let schema = FeatureSchema::new(&matrix, &ctx.cfg.features);
    with_run(&ctx, "features", Some(hash), |out| {
        let mut buf = Vec::new();
        write_feature_csv(&matrix, &mut buf)?;
        out.text("features.csv", std::str::from_utf8(&buf).expect("utf-8 csv"))?;
        out.json("feature_schema.json", &schema)?;
        Ok(json!({
            "rows": matrix.len(),
            "warmup_dropped": matrix.warmup_dropped,
            "columns": matrix.column_names,
            "schema_hash": schema.schema_hash,
        }))
    })
}

fn payload_for(run: &FamilyRun, bundle: &DatasetBundle) -> Option<ModelPayload> {
    let model = run.model.clone()?;
    Some(ModelPayload {
        format_version: FORMAT_VERSION,
        family: run.family,
        seed: model.seed,
        feature_schema: FeatureSchema::new(&bundle.train, &bundle.feature_config),
        scaler: bundle.scaler.clone(),
        manifest_hash: bundle.manifest.hash(),
        model,
    })
}

fn run_status(run: &FamilyRun) -> Value {
    json!({
        "family": run.family,
        "liquidity_included": run.liquidity_included,
        "status": if run.error.is_some() { "failed" } else { "ok" },
        "error": run.error,
    })
}

pub fn train(args: &GlobalArgs) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let series = ctx.series(None)?;
    let hash = ctx.input_hash(None)?;
    let result = run_experiment(&series, &ctx.cfg.experiment())?;
    let bundle = result.bundle.as_ref().expect("experiment keeps its bundle");
    with_run(&ctx, "train", Some(hash), |out| {
        let mut families = Vec::new();
        for run in &result.runs {
            let key = run.family.key();
            if let Some(payload) = payload_for(run, bundle) {
                let rel = format!("models/{key}.json");
                save_model(&out.dir.join(&rel), &payload)?;
                out.manifest.record(rel);
            }
            if let Some(h) = &run.loss_history {
                out.text(&format!("loss/{key}.csv"), &loss_csv(h))?;
            }
            if let Some(g) = &run.grid {
                out.json(&format!("grid/{key}.json"), g)?;
            }
            families.push(run_status(run));
        }
        let summary = json!({
            "config_hash": result.config_hash,
            "manifest_hash": result.manifest_hash,
            "seed": result.seed,
            "families": families,
        });
        out.json("train_summary.json", &summary)?;
        Ok(summary)
    })
}

pub fn evaluate(args: &GlobalArgs) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let series = ctx.series(None)?;
    let hash = ctx.input_hash(None)?;
    let matrix = build_feature_matrix(&series, &ctx.cfg.features)?;
    let bundle = DatasetBundle::build(&matrix, &ctx.cfg.features, &ctx.cfg.split, ctx.cfg.scaler)?;
    let config_hash = ctx.cfg.hash();
    let mut loaded = Vec::new();
    for &family in &ctx.cfg.families {
        let payload = load_model(&ctx.out.join(format!("models/{}.json", family.key())))?;
        if payload.manifest_hash != bundle.manifest.hash() {
            return Err(Error::SchemaMismatch(format!(
                "{} model was trained on a different dataset bundle",
                family.key()
            )));
        }
        loaded.push(payload);
    }
    with_run(&ctx, "evaluate", Some(hash), |out| {
        let mut reports: Vec<EvalReport> = Vec::new();
        let mut rows = Vec::new();
        for payload in &loaded {
            let key = payload.family.key();
            let (val, _) = evaluate_with_hash(&payload.model, &bundle, Block::Val, &config_hash)?;
            let (test, preds) = evaluate_with_hash(&payload.model, &bundle, Block::Test, &config_hash)?;
            out.text(&format!("predictions/{key}_test.csv"), &preds.to_csv_string()?)?;
            rows.push(TableRow {
                model: test.model.clone(),
                liquidity_features: liqcast::eval::liquidity_label(test.liquidity_included).to_string(),
                mae: format!("{:.4}", test.mae),
                mse: format!("{:.6}", test.mse),
                r2: test.r2.map_or_else(|| "undefined".into(), |r| format!("{r:.4}")),
            });
            reports.push(val);
            reports.push(test);
        }
        out.json("evaluation.json", &reports)?;
        out.text("evaluation_table.txt", &render_table(&rows))?;
        Ok(json!({"reports": reports}))
    })
}

pub fn ablate(args: &GlobalArgs) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let series = ctx.series(None)?;
    let hash = ctx.input_hash(None)?;
    let report = run_ablation(&series, &ctx.cfg.experiment())?;
    with_run(&ctx, "ablate", Some(hash), |out| {
        out.json("ablation.json", &report)?;
        let rows = table_rows(&report);
        let table = render_table(&rows);
        out.text("ablation_table.txt", &table)?;
        out.text("ablation_table.csv", &table_csv(&rows))?;
        let mut statuses = Vec::new();
        for fam in &report.families {
            for run in [&fam.with_liquidity, &fam.without_liquidity] {
                let stem = format!("{}_{}", run.family.key(), arm_label(run.liquidity_included));
                if let Some(p) = &run.predictions {
                    out.text(&format!("predictions/{stem}.csv"), &p.to_csv_string()?)?;
                }
                if let Some(h) = &run.loss_history {
                    out.text(&format!("loss/{stem}.csv"), &loss_csv(h))?;
                }
                statuses.push(run_status(run));
            }
        }
        Ok(json!({"rows": rows.len(), "table": table, "families": statuses}))
    })
}

pub fn predict(args: &GlobalArgs, model_path: &Path, features_path: &Path) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let payload = load_model(model_path)?;
    let sidecar = features_path.with_file_name("feature_schema.json");
    if sidecar.exists() {
        let schema: FeatureSchema = serde_json::from_str(&read_to_string(&sidecar)?)?;
        if schema.schema_hash != payload.feature_schema.schema_hash {
            return Err(Error::SchemaMismatch(format!(
                "feature schema hash {} does not match the model's {}",
                schema.schema_hash, payload.feature_schema.schema_hash
            )));
        }
    }
    let features = liqcast::features::read_feature_csv(features_path, &payload.feature_schema)?;
    let series = predict_series(&payload, &features)?;
    let hash = ctx.input_hash(Some(features_path))?;
    with_run(&ctx, "predict", Some(hash), |out| {
        out.text("predictions.csv", &series.to_csv_string()?)?;
        Ok(json!({"family": payload.family, "predictions": series.len()}))
    })
}

/// Scales raw feature rows with the model's scaler, windows them and maps
/// the outputs back to prices.
pub fn predict_series(payload: &ModelPayload, features: &liqcast::features::FeatureMatrix) -> Result<PredictionSeries> {
    let w = payload.model.window_length;
    let scaled = payload.scaler.transform(features)?;
    let windows = make_windows(&scaled, w)?;
    let raw = payload.model.predict(&windows)?;
    let predicted = payload.scaler.inverse_transform(&raw, TARGET_COLUMN)?;
    Ok(PredictionSeries {
        timestamps: windows.target_timestamps.clone(),
        actual: features.rows[w..].iter().map(|r| r.target_close).collect(),
        predicted,
    })
}

pub fn export_plots(args: &GlobalArgs, from: Option<PathBuf>) -> Result<Value> {
    let ctx = Ctx::new(args)?;
    let src = from.unwrap_or_else(|| ctx.out.clone());
    if !src.is_dir() {
        return Err(Error::FileNotFound(src));
    }
    let mut copies: Vec<(PathBuf, String)> = Vec::new();
    for sub in ["loss", "predictions"] {
        let dir = src.join(sub);
        if let Ok(entries) = fs::read_dir(&dir) {
            let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
            names.sort();
            for p in names.into_iter().filter(|p| p.extension().is_some_and(|x| x == "csv")) {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                copies.push((p, format!("plots/{sub}_{name}")));
            }
        }
    }
    let metrics: Option<Vec<TableRow>> = match src.join("ablation.json") {
        p if p.exists() => Some(table_rows(&serde_json::from_str(&read_to_string(&p)?)?)),
        _ => None,
    };
    let series = ctx.series(None).ok();
    if copies.is_empty() && metrics.is_none() && series.is_none() {
        return Err(Error::Empty("run directory has nothing to export"));
    }
    with_run(&ctx, "export-plots", None, |out| {
        let mut written = Vec::new();
        for (p, rel) in &copies {
            out.text(rel, &read_to_string(p)?)?;
            written.push(rel.clone());
        }
        if let Some(rows) = &metrics {
            out.text("plots/metrics_comparison.csv", &table_csv(rows))?;
            written.push("plots/metrics_comparison.csv".into());
        }
        if let Some(s) = &series {
            let body = csv_string(&["timestamp", "close", "volume_base"], s.len(), |i| {
                let c = &s.candles[i];
                vec![
                    format_timestamp(&c.timestamp),
                    c.close.to_string(),
                    c.volume_base.to_string(),
                ]
            });
            out.text("plots/price_volume.csv", &body)?;
            written.push("plots/price_volume.csv".into());
        }
        Ok(json!({"written": written}))
    })
}
