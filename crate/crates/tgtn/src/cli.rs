//! Command-line pipeline: `gen`, `train`, `eval`, `ablate`, `stream`,
//! `report`.
//!
//! Configuration model: every command has a JSON config whose defaults are
//! fully materialized, then overlaid (in order) by the `--config` file, by
//! repeated `--set key.path=value` flags, and finally by `--seed`, which
//! rewrites every field named `seed` anywhere in the resolved document.
//! The resolved configuration is embedded in the run manifest, so a run
//! can be reproduced from its manifest alone.
//!
//! Outputs land in a per-run directory (`--out-dir`, defaulting to
//! `runs/<command>-<timestamp>-<seed>`), which always receives exactly one
//! `manifest.json` on success. Exit codes: 0 success, 1 any pipeline
//! error, 2 usage errors.

use std::collections::HashSet;
use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::{build_graph, EdgeRule, EncoderConfig};
use crate::metrics::{metrics_report, render_comparison, render_report, MetricsReport, Scored};
use crate::model::{load_checkpoint, save_checkpoint, TgtnConfig};
use crate::stream::{consistency_check, records_jsonl, replay, RuleEngine, WindowConfig};
use crate::train::{
    history_csv, kfold_cv, rfm_features, train, train_logistic_baseline, TrainConfig,
};
use crate::txgen::{
    generate, load_dataset, negative_sample, read_transactions, save_dataset, temporal_split,
    Dataset, GenConfig, Label,
};

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "tgtn",
    version = env!("CARGO_PKG_VERSION"),
    about = "Transaction-graph transformer fraud-detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; missing fields fall back to built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config field by dotted path, e.g. --set model.d_model=16.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override every `seed` field in the resolved configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<command>-<timestamp>-<seed>).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic transaction dataset (JSONL).
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model; writes checkpoint.json and history.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset JSONL to train on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Optional grid file: runs k-fold CV and trains the selected entry.
        #[arg(long, value_name = "PATH")]
        grid: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset (month-wise metrics report).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Train and evaluate the full model, its noPE/noAT ablations, and the
    /// RFM logistic baseline on one dataset; emits a comparison table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Replay a dataset through the prescreen + sliding-window scorer.
    Stream {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Rule-engine JSON (blacklists, max_amount); default: empty engine.
        #[arg(long, value_name = "PATH")]
        engine: Option<PathBuf>,
    },
    /// Render stored JSON metric reports as text tables.
    Report {
        #[command(flatten)]
        common: Common,
        /// Report JSON file(s) produced by eval or ablate.
        #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
}

/// Entry point used by `main` and by tests. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

// ---------------------------------------------------------------------------
// configuration plumbing

/// Deep-merge `overlay` onto `base`: objects merge key-wise, everything
/// else is replaced.
fn merge_value(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply one `--set key.path=value` override. Paths must name existing
/// config fields (all defaults are materialized, so every legal field is
/// present); values parse as JSON scalars with a string fallback.
fn apply_set(base: &mut Value, spec: &str) -> CliResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("--set {spec:?}: expected KEY=VALUE"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = base;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| format!("--set {path}: {} is not a config section", parts[..i].join(".")))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| format!("--set {path}: unknown config key {part:?}"))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        cursor = slot;
    }
    unreachable!("split('.') yields at least one part")
}

/// Rewrite every field named `seed` in the document.
fn override_seeds(value: &mut Value, seed: u64) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k == "seed" {
                    *v = Value::from(seed);
                } else {
                    override_seeds(v, seed);
                }
            }
        }
        Value::Array(items) => {
            for v in items {
                override_seeds(v, seed);
            }
        }
        _ => {}
    }
}

/// Materialize a command configuration: defaults <- file <- --set <- --seed.
/// Returns the typed config plus the resolved JSON document for the
/// manifest.
fn load_config<T>(default: &T, common: &Common) -> CliResult<(T, Value)>
where
    T: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(default).expect("default config serializes");
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let overlay: Value = serde_json::from_str(&text)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        merge_value(&mut value, overlay);
    }
    for spec in &common.sets {
        apply_set(&mut value, spec)?;
    }
    if let Some(seed) = common.seed {
        override_seeds(&mut value, seed);
    }
    let typed: T = serde_json::from_value(value.clone())
        .map_err(|e| format!("invalid configuration: {e}"))?;
    Ok((typed, value))
}

// ---------------------------------------------------------------------------
// run directory + manifest

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    /// The --seed override, when given.
    seed_flag: Option<u64>,
    /// Fully resolved configuration (defaults materialized).
    config: &'a Value,
    inputs: &'a [String],
    outputs: &'a [String],
    started_unix_ms: i64,
    finished_unix_ms: i64,
}

struct RunDir {
    command: &'static str,
    dir: PathBuf,
    config: Value,
    seed_flag: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started_unix_ms: i64,
}

impl RunDir {
    fn create(command: &'static str, common: &Common, config: Value, name_seed: u64) -> CliResult<Self> {
        let dir = match &common.out_dir {
            Some(d) => d.clone(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
                PathBuf::from(format!("runs/{command}-{stamp}-{name_seed}"))
            }
        };
        fs::create_dir_all(&dir)
            .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
        Ok(RunDir {
            command,
            dir,
            config,
            seed_flag: common.seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: chrono::Utc::now().timestamp_millis(),
        })
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    fn finish(mut self) -> CliResult<()> {
        let finished = chrono::Utc::now().timestamp_millis();
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed_flag: self.seed_flag,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: finished,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// per-command configs

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainCmdConfig {
    model: TgtnConfig,
    train: TrainConfig,
    edge_rule: EdgeRule,
    encoder: EncoderConfig,
    /// Negative-sampling ratio (kept legit per fraud) applied to the
    /// dataset before training; `null` trains on everything.
    keep_ratio: Option<f64>,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            model: TgtnConfig::default(),
            train: TrainConfig::default(),
            edge_rule: EdgeRule::default(),
            encoder: EncoderConfig::default(),
            keep_ratio: Some(3.0),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvalCmdConfig {
    threshold: f64,
}

impl Default for EvalCmdConfig {
    fn default() -> Self {
        EvalCmdConfig { threshold: 0.5 }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AblateCmdConfig {
    model: TgtnConfig,
    train: TrainConfig,
    edge_rule: EdgeRule,
    encoder: EncoderConfig,
    keep_ratio: Option<f64>,
    /// Temporal split: the boundary is the timestamp at this quantile of
    /// the dataset (transactions strictly earlier train; the rest test).
    split_quantile: f64,
    /// Explicit boundary timestamp; overrides split_quantile when set.
    split_ts: Option<i64>,
    baseline_lr: f64,
    baseline_epochs: usize,
    threshold: f64,
}

impl Default for AblateCmdConfig {
    fn default() -> Self {
        AblateCmdConfig {
            model: TgtnConfig::default(),
            train: TrainConfig::default(),
            edge_rule: EdgeRule::default(),
            encoder: EncoderConfig::default(),
            keep_ratio: Some(3.0),
            split_quantile: 0.75,
            split_ts: None,
            baseline_lr: 0.1,
            baseline_epochs: 500,
            threshold: 0.5,
        }
    }
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct StreamCmdConfig {
    window: WindowConfig,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct ReportCmdConfig {}

fn default_grid_k() -> usize {
    5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    #[serde(default = "default_grid_k")]
    k: usize,
    /// Partial overlays: each entry may carry `model` and/or `train`
    /// objects merged over the base config.
    entries: Vec<Value>,
}

// ---------------------------------------------------------------------------
// command implementations

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Gen { common } => cmd_gen(&common),
        Command::Train { common, data, grid } => cmd_train(&common, &data, grid.as_deref()),
        Command::Eval { common, data, checkpoint } => cmd_eval(&common, &data, &checkpoint),
        Command::Ablate { common, data } => cmd_ablate(&common, &data),
        Command::Stream { common, data, checkpoint, engine } => {
            cmd_stream(&common, &data, &checkpoint, engine.as_deref())
        }
        Command::Report { common, input } => cmd_report(&common, &input),
    }
}

fn cmd_gen(common: &Common) -> CliResult<()> {
    let (config, value) = load_config(&GenConfig::default(), common)?;
    config.validate()?;
    let mut run = RunDir::create("gen", common, value, config.seed)?;
    let ds = generate(&config)?;
    let path = run.dir.join("dataset.jsonl");
    save_dataset(&ds, &path)?;
    run.outputs.push(path.display().to_string());
    println!(
        "gen: {} transactions ({} fraud, {} legit) -> {}",
        ds.len(),
        ds.n_fraud(),
        ds.n_legit(),
        path.display()
    );
    run.finish()
}

/// Materialize a grid entry by merging its `model` / `train` overlays onto
/// the base command config.
fn grid_entry_configs(
    base: &TrainCmdConfig,
    entry: &Value,
) -> CliResult<(TgtnConfig, TrainConfig)> {
    let obj = entry
        .as_object()
        .ok_or("grid entries must be JSON objects with model/train overlays")?;
    for key in obj.keys() {
        if key != "model" && key != "train" {
            return Err(format!("grid entry has unknown key {key:?}").into());
        }
    }
    let mut model_v = serde_json::to_value(base.model).unwrap();
    if let Some(m) = obj.get("model") {
        merge_value(&mut model_v, m.clone());
    }
    let mut train_v = serde_json::to_value(base.train).unwrap();
    if let Some(t) = obj.get("train") {
        merge_value(&mut train_v, t.clone());
    }
    let model: TgtnConfig =
        serde_json::from_value(model_v).map_err(|e| format!("grid entry model: {e}"))?;
    let train: TrainConfig =
        serde_json::from_value(train_v).map_err(|e| format!("grid entry train: {e}"))?;
    Ok((model, train))
}

fn cmd_train(common: &Common, data: &Path, grid: Option<&Path>) -> CliResult<()> {
    let (cfg, value) = load_config(&TrainCmdConfig::default(), common)?;
    let mut run = RunDir::create("train", common, value, cfg.train.seed)?;
    run.input(data);
    let ds = load_dataset(data)?;
    let sampled = match cfg.keep_ratio {
        Some(r) => negative_sample(&ds, r, cfg.train.seed),
        None => ds,
    };

    let (model_cfg, train_cfg) = match grid {
        None => (cfg.model, cfg.train),
        Some(grid_path) => {
            run.input(grid_path);
            let text = fs::read_to_string(grid_path)
                .map_err(|e| format!("cannot read grid {}: {e}", grid_path.display()))?;
            let doc: GridDoc = serde_json::from_str(&text)
                .map_err(|e| format!("grid {}: {e}", grid_path.display()))?;
            let pairs: Vec<(TgtnConfig, TrainConfig)> = doc
                .entries
                .iter()
                .map(|e| grid_entry_configs(&cfg, e))
                .collect::<CliResult<_>>()?;
            let report = kfold_cv(&sampled, doc.k, &pairs, &cfg.edge_rule, &cfg.encoder)?;
            run.write("cv_report.json", &serde_json::to_string_pretty(&report).unwrap())?;
            let best = &report.entries[report.selected];
            println!(
                "cv: selected grid entry {} (mean AP {:.4} ± {:.4} over {} folds)",
                report.selected, best.mean_ap, best.std_ap, report.k
            );
            pairs[report.selected]
        }
    };

    let g = build_graph(&sampled.transactions, &cfg.edge_rule, &cfg.encoder)?;
    let outcome = train(&g, &model_cfg, &train_cfg)?;
    let ckpt_path = run.dir.join("checkpoint.json");
    save_checkpoint(&outcome.model, &cfg.encoder, &cfg.edge_rule, &ckpt_path)?;
    run.outputs.push(ckpt_path.display().to_string());
    run.write("history.csv", &history_csv(&outcome.history))?;
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "train: {} nodes ({} train / {} val), best epoch {} val AP {:.4} AUC {:.4} -> {}",
        g.len(),
        outcome.n_train,
        outcome.n_val,
        outcome.best_epoch,
        best.val_ap,
        best.val_auc,
        ckpt_path.display()
    );
    run.finish()
}

/// Collect scored labeled nodes (fraud = positive); unlabeled nodes are
/// skipped.
fn scored_nodes(
    timestamps: &[i64],
    labels: &[Label],
    scores: &[f64],
    keep: impl Fn(usize) -> bool,
) -> Vec<Scored> {
    (0..labels.len())
        .filter(|&i| keep(i))
        .filter_map(|i| {
            labels[i].as_target().map(|t| Scored {
                timestamp: timestamps[i],
                score: scores[i],
                label: t == 1.0,
            })
        })
        .collect()
}

fn cmd_eval(common: &Common, data: &Path, checkpoint: &Path) -> CliResult<()> {
    let (cfg, value) = load_config(&EvalCmdConfig::default(), common)?;
    let mut run = RunDir::create("eval", common, value, common.seed.unwrap_or(0))?;
    run.input(data);
    run.input(checkpoint);
    let (model, enc, rule) = load_checkpoint(checkpoint)?;
    let ds = load_dataset(data)?;
    let g = build_graph(&ds.transactions, &rule, &enc)?;
    let scores = model.forward(&g, false, 0)?;
    let scored = scored_nodes(g.timestamps(), g.labels(), &scores, |_| true);
    let report = metrics_report(&scored, cfg.threshold)?;
    run.write("report.json", &serde_json::to_string_pretty(&report).unwrap())?;
    let text = render_report("TGTN", &report);
    run.write("report.txt", &text)?;
    print!("{text}");
    run.finish()
}

fn cmd_ablate(common: &Common, data: &Path) -> CliResult<()> {
    let (cfg, value) = load_config(&AblateCmdConfig::default(), common)?;
    if !(0.0 < cfg.split_quantile && cfg.split_quantile < 1.0) {
        return Err("split_quantile must lie in (0, 1)".into());
    }
    let mut run = RunDir::create("ablate", common, value, cfg.train.seed)?;
    run.input(data);
    let ds = load_dataset(data)?;
    if ds.is_empty() {
        return Err("ablate needs a non-empty dataset".into());
    }
    let split_ts = cfg.split_ts.unwrap_or_else(|| {
        let idx = ((ds.len() as f64 * cfg.split_quantile) as usize).min(ds.len() - 1);
        ds.transactions[idx].timestamp
    });
    let (train_ds, test_ds) = temporal_split(&ds, split_ts);
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(format!(
            "temporal split at {split_ts} leaves an empty side ({} train / {} test)",
            train_ds.len(),
            test_ds.len()
        )
        .into());
    }
    let sampled = match cfg.keep_ratio {
        Some(r) => negative_sample(&train_ds, r, cfg.train.seed),
        None => train_ds.clone(),
    };

    // one full graph for transductive evaluation; test nodes are the tail
    let full_g = build_graph(&ds.transactions, &cfg.edge_rule, &cfg.encoder)?;
    let is_test = |i: usize| ds.transactions[i].timestamp >= split_ts;

    let train_g = build_graph(&sampled.transactions, &cfg.edge_rule, &cfg.encoder)?;
    let variants: [(&str, TgtnConfig); 3] = [
        ("TGTN", cfg.model),
        ("TGTN-noPE", TgtnConfig { use_pe: false, ..cfg.model }),
        ("TGTN-noAT", TgtnConfig { use_attention: false, ..cfg.model }),
    ];
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for (name, model_cfg) in variants {
        let outcome = train(&train_g, &model_cfg, &cfg.train)?;
        let scores = outcome.model.forward(&full_g, false, 0)?;
        let scored = scored_nodes(full_g.timestamps(), full_g.labels(), &scores, is_test);
        let report = metrics_report(&scored, cfg.threshold)?;
        println!("ablate: {name} test AP {:.4} AUC {:.4}", report.ap, report.auc);
        rows.push((name.to_string(), report));
    }

    // RFM logistic baseline: features over the full timeline (past-only by
    // construction), trained on the same sampled training transactions.
    let feats = rfm_features(&ds.transactions, &[86_400, 7 * 86_400]);
    let sampled_ids: HashSet<u64> = sampled.transactions.iter().map(|t| t.tx_id).collect();
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    for (i, tx) in ds.transactions.iter().enumerate() {
        if sampled_ids.contains(&tx.tx_id) {
            if let Some(t) = tx.label.as_target() {
                train_rows.push(i);
                train_labels.push(t);
            }
        }
    }
    let mut xs = crate::numerics::Matrix::zeros(train_rows.len(), feats.cols());
    for (r, &i) in train_rows.iter().enumerate() {
        xs.row_mut(r).copy_from_slice(feats.row(i));
    }
    let baseline =
        train_logistic_baseline(&xs, &train_labels, cfg.baseline_lr, cfg.baseline_epochs, cfg.train.seed)?;
    for w in &baseline.warnings {
        eprintln!("warning: baseline: {w}");
    }
    let base_scores = baseline.predict(&feats);
    let all_ts: Vec<i64> = ds.transactions.iter().map(|t| t.timestamp).collect();
    let all_labels: Vec<Label> = ds.transactions.iter().map(|t| t.label).collect();
    let scored = scored_nodes(&all_ts, &all_labels, &base_scores, is_test);
    let report = metrics_report(&scored, cfg.threshold)?;
    println!("ablate: RFM-logistic test AP {:.4} AUC {:.4}", report.ap, report.auc);
    rows.push(("RFM-logistic".to_string(), report));

    run.write("ablate.json", &serde_json::to_string_pretty(&rows).unwrap())?;
    let table = render_comparison(&rows);
    run.write("ablate.txt", &table)?;
    print!("{table}");
    run.finish()
}

fn cmd_stream(
    common: &Common,
    data: &Path,
    checkpoint: &Path,
    engine_path: Option<&Path>,
) -> CliResult<()> {
    let (cfg, value) = load_config(&StreamCmdConfig::default(), common)?;
    let mut run = RunDir::create("stream", common, value, common.seed.unwrap_or(0))?;
    run.input(data);
    run.input(checkpoint);
    let (model, enc, rule) = load_checkpoint(checkpoint)?;
    // file order on purpose: the replay is the component that must cope
    // with whatever order events arrive in
    let transactions = read_transactions(data)?;
    let ds = Dataset { transactions, meta: Vec::new() };
    let engine = match engine_path {
        None => RuleEngine::default(),
        Some(p) => {
            run.input(p);
            let text = fs::read_to_string(p)
                .map_err(|e| format!("cannot read engine {}: {e}", p.display()))?;
            RuleEngine::from_json(&text)?
        }
    };
    let (records, stats) = replay(&ds, &model, &rule, &enc, &cfg.window, &engine)?;
    run.write("replay.jsonl", &records_jsonl(&records))?;
    run.write("stats.json", &serde_json::to_string_pretty(&stats).unwrap())?;
    let diff = consistency_check(&ds, &model, &rule, &enc, &cfg.window)?;
    run.write(
        "consistency.json",
        &serde_json::to_string_pretty(&serde_json::json!({ "max_abs_score_diff": diff })).unwrap(),
    )?;
    println!("stream: {}", stats.summary());
    println!("stream: max |stream - batch| score difference = {diff:e}");
    run.finish()
}

fn cmd_report(common: &Common, inputs: &[PathBuf]) -> CliResult<()> {
    let (_, value) = load_config(&ReportCmdConfig::default(), common)?;
    let mut run = RunDir::create("report", common, value, common.seed.unwrap_or(0))?;
    let mut rendered = String::new();
    for path in inputs {
        run.input(path);
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read report {}: {e}", path.display()))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        // ablate comparison first (an array), then a single eval report
        let block = if let Ok(rows) = serde_json::from_str::<Vec<(String, MetricsReport)>>(&text) {
            render_comparison(&rows)
        } else if let Ok(report) = serde_json::from_str::<MetricsReport>(&text) {
            render_report(&name, &report)
        } else {
            return Err(format!("{}: not a recognized report JSON", path.display()).into());
        };
        rendered.push_str(&block);
        rendered.push('\n');
    }
    run.write("rendered.txt", &rendered)?;
    print!("{rendered}");
    run.finish()
}
