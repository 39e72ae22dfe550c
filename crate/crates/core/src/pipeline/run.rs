use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::artifacts::{
    events_tsv, footrule_tsv, metrics_tsv, parse_events, parse_footrule, parse_metrics, parse_predictions,
    predictions_tsv, read_text, FootruleRecord, Prediction, StoredEvent,
};
use super::config::{InstrumentConfig, RunConfig};
use super::{dataset, extract, Method};
use crate::backtest::{equity_curve, rolling_sharpe, simulate, smooth, trades_tsv, Signal, TradeRecord};
use crate::error::{Error, Result};
use crate::explain::{
    bootstrap_null, extract_paths, footrule, interaction_matrix, rank_matrix, shapley_interactions, InteractionMatrix,
};
use crate::features::annotate;
use crate::gbdt::{train, walk_forward, BatchViews, Dataset, GbdtModel, WalkForwardConfig};
use crate::labeling::label_events;
use crate::market_data::{generate_synthetic, load_ticks, split_batches, write_ticks, OrderPolicy, TickRecord};
use crate::patterns::PatternEvent;
use crate::stats::{paired_from_metrics, render_report, rq_harness, Comparison, Measure, MetricsRecord, ResearchQuestion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Extract,
    Label,
    Features,
    Train,
    Explain,
    Backtest,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Extract,
        Stage::Label,
        Stage::Features,
        Stage::Train,
        Stage::Explain,
        Stage::Backtest,
        Stage::Stats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Label => "label",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Backtest => "backtest",
            Stage::Stats => "stats",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub files: Vec<FileEntry>,
}

/// `manifest.json` at the root of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Completed stages in pipeline order.
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    fn fresh(cfg: &RunConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            config: serde_json::from_str(&cfg.canonical_json()).expect("valid json"),
            stages: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage.name())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RunLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn artifact_name(inst: &InstrumentConfig, method: Method) -> String {
    format!("{}_{method}", inst.symbol)
}

/// Generates or loads the full tick stream of one instrument.
pub fn ingest_instrument(cfg: &RunConfig, inst: &InstrumentConfig) -> Result<Vec<TickRecord>> {
    if let Some(syn) = &inst.synthetic {
        return Ok(generate_synthetic(cfg.derive_seed(&["ingest", &inst.symbol]), syn)?.ticks);
    }
    let spec = inst.spec();
    let policy = if inst.sort_unordered {
        OrderPolicy::WarnAndSort
    } else {
        OrderPolicy::Reject
    };
    let mut ticks: Vec<TickRecord> = Vec::new();
    for p in &inst.paths {
        let part = load_ticks(p, &spec, policy)?;
        if let (Some(last), Some(first)) = (ticks.last(), part.first()) {
            if first.start_ts_ms < last.start_ts_ms && !inst.sort_unordered {
                return Err(Error::InvalidInput(format!(
                    "{} starts before the end of the previous file",
                    p.display()
                )));
            }
        }
        ticks.extend(part);
    }
    if inst.sort_unordered {
        ticks.sort_by_key(|t| t.start_ts_ms);
    }
    Ok(ticks)
}

struct Batches {
    labels: Vec<String>,
    ticks: Vec<Vec<TickRecord>>,
    /// Index of each batch's first tick in the full stream.
    offsets: Vec<usize>,
}

impl Batches {
    fn split(ticks: &[TickRecord], months: u32) -> Self {
        let batches = split_batches(ticks, months);
        let mut offsets = Vec::with_capacity(batches.len());
        let mut at = 0;
        for b in &batches {
            offsets.push(at);
            at += b.len();
        }
        Batches {
            labels: batches.iter().map(|b| b.label.clone()).collect(),
            ticks: batches.into_iter().map(|b| b.ticks).collect(),
            offsets,
        }
    }

    fn slices(&self) -> Vec<&[TickRecord]> {
        self.ticks.iter().map(Vec::as_slice).collect()
    }

    fn group(&self, events: Vec<StoredEvent>) -> Vec<Vec<PatternEvent>> {
        let mut out = vec![Vec::new(); self.ticks.len()];
        for e in events {
            out[e.batch].push(e.event);
        }
        out
    }
}

fn flatten(grouped: Vec<Vec<PatternEvent>>) -> Vec<StoredEvent> {
    grouped
        .into_iter()
        .enumerate()
        .flat_map(|(batch, evs)| evs.into_iter().map(move |event| StoredEvent { batch, event }))
        .collect()
}

/// Event counts per instrument and method, without writing anything.
/// Cached tick artifacts are used when present.
pub fn dry_run_counts(cfg: &RunConfig) -> Result<Vec<(String, Method, usize)>> {
    let mut out = Vec::new();
    for inst in &cfg.instruments {
        let cached = cfg.out_dir.join("ingest").join(format!("{}_ticks.csv.gz", inst.symbol));
        let ticks = if cached.exists() {
            load_ticks(&cached, &inst.spec(), OrderPolicy::Reject)?
        } else {
            ingest_instrument(cfg, inst)?
        };
        let batches = Batches::split(&ticks, cfg.months_per_batch);
        for method in cfg.methods() {
            let n = batches
                .ticks
                .par_iter()
                .map(|t| extract(t, method, &cfg.level_detection).len())
                .sum();
            out.push((inst.symbol.clone(), method, n));
        }
    }
    Ok(out)
}

/// An open run directory. Holds the directory lock until dropped.
pub struct Run {
    cfg: RunConfig,
    dir: PathBuf,
    manifest: Manifest,
    pending: Vec<FileEntry>,
    _lock: RunLock,
}

impl Run {
    pub fn open(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = cfg.out_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let lock = RunLock::acquire(&dir)?;
        let mpath = dir.join(MANIFEST_FILE);
        let manifest = match Manifest::load(&mpath) {
            Ok(m) if m.config_sha256 == cfg.hash() && m.version == env!("CARGO_PKG_VERSION") => m,
            Ok(_) => {
                warn!("configuration changed since the last run; cached stages are ignored");
                Manifest::fresh(&cfg)
            }
            Err(_) => Manifest::fresh(&cfg),
        };
        Ok(Run {
            cfg,
            dir,
            manifest,
            pending: Vec::new(),
            _lock: lock,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// True when the manifest records `stage` and its files are unchanged.
    pub fn is_complete(&self, stage: Stage) -> bool {
        self.manifest.stage(stage).is_some_and(|r| {
            r.files
                .iter()
                .all(|f| fs::read(self.dir.join(&f.path)).is_ok_and(|b| sha256_hex(&b) == f.sha256))
        })
    }

    /// Runs every stage in order. With `resume`, stages whose artifacts are
    /// intact are skipped.
    pub fn run_all(&mut self, resume: bool) -> Result<()> {
        for stage in Stage::ALL {
            if resume && self.is_complete(stage) {
                info!("stage {stage}: cached");
                continue;
            }
            self.run_stage(stage)?;
        }
        Ok(())
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        info!("stage {stage}: start");
        self.manifest.stages.retain(|r| r.stage != stage.name());
        self.pending.clear();
        let res = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Extract => self.extract(),
            Stage::Label => self.label(),
            Stage::Features => self.features(),
            Stage::Train => self.train(),
            Stage::Explain => self.explain(),
            Stage::Backtest => self.backtest(),
            Stage::Stats => self.stats(),
        };
        let files = std::mem::take(&mut self.pending);
        if let Err(e) = res {
            let _ = self.save_manifest();
            return Err(Error::Stage {
                stage: stage.name().into(),
                source: Box::new(e),
            });
        }
        let n = files.len();
        self.manifest.stages.push(StageRecord {
            stage: stage.name().into(),
            files,
        });
        self.manifest
            .stages
            .sort_by_key(|r| r.stage.parse::<Stage>().map_or(usize::MAX, |s| s as usize));
        self.save_manifest()?;
        info!("stage {stage}: done, {n} files");
        Ok(())
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.pending.push(FileEntry {
            path: rel.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn input(&self, rel: &str, producer: Stage) -> Result<(PathBuf, String)> {
        let path = self.dir.join(rel);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path,
                producer: producer.name().into(),
            });
        }
        let text = read_text(&path)?;
        Ok((path, text))
    }

    fn ticks_rel(inst: &InstrumentConfig) -> String {
        format!("ingest/{}_ticks.csv.gz", inst.symbol)
    }

    fn batches(&self, inst: &InstrumentConfig) -> Result<Batches> {
        let path = self.dir.join(Self::ticks_rel(inst));
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path,
                producer: Stage::Ingest.name().into(),
            });
        }
        let ticks = load_ticks(&path, &inst.spec(), OrderPolicy::Reject)?;
        Ok(Batches::split(&ticks, self.cfg.months_per_batch))
    }

    fn events(&self, stage: Stage, inst: &InstrumentConfig, method: Method, batches: &Batches) -> Result<Vec<StoredEvent>> {
        let (path, text) = self.input(&format!("{stage}/{}.tsv", artifact_name(inst, method)), stage)?;
        parse_events(&path, &text, &batches.slices())
    }

    fn ingest(&mut self) -> Result<()> {
        for inst in self.cfg.instruments.clone() {
            let ticks = ingest_instrument(&self.cfg, &inst)?;
            let rel = Self::ticks_rel(&inst);
            let path = self.dir.join(&rel);
            fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| Error::io(&path, e))?;
            write_ticks(&path, &inst.spec(), &ticks)?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            self.pending.push(FileEntry {
                path: rel,
                sha256: sha256_hex(&bytes),
            });
            let n_batches = split_batches(&ticks, self.cfg.months_per_batch).len();
            info!("{}: {} ticks in {n_batches} batches", inst.symbol, ticks.len());
        }
        Ok(())
    }

    fn extract(&mut self) -> Result<()> {
        for inst in self.cfg.instruments.clone() {
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let grouped: Vec<Vec<PatternEvent>> = batches
                    .ticks
                    .par_iter()
                    .map(|t| extract(t, method, &self.cfg.level_detection))
                    .collect();
                let events = flatten(grouped);
                info!("{} {method}: {} events", inst.symbol, events.len());
                self.put(&format!("extract/{}.tsv", artifact_name(&inst, method)), events_tsv(&events, false).as_bytes())?;
            }
        }
        Ok(())
    }

    fn label(&mut self) -> Result<()> {
        for inst in self.cfg.instruments.clone() {
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let grouped = batches.group(self.events(Stage::Extract, &inst, method, &batches)?);
                let labelled: Vec<Vec<PatternEvent>> = grouped
                    .par_iter()
                    .zip(&batches.ticks)
                    .map(|(evs, ticks)| label_events(evs, ticks, &self.cfg.labels))
                    .collect();
                let events = flatten(labelled);
                self.put(&format!("label/{}.tsv", artifact_name(&inst, method)), events_tsv(&events, false).as_bytes())?;
            }
        }
        Ok(())
    }

    fn features(&mut self) -> Result<()> {
        for inst in self.cfg.instruments.clone() {
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let mut grouped = batches.group(self.events(Stage::Label, &inst, method, &batches)?);
                grouped
                    .par_iter_mut()
                    .zip(&batches.ticks)
                    .for_each(|(evs, ticks)| annotate(evs, ticks, &self.cfg.features));
                let events = flatten(grouped);
                self.put(&format!("features/{}.tsv", artifact_name(&inst, method)), events_tsv(&events, true).as_bytes())?;
            }
        }
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        for inst in self.cfg.instruments.clone() {
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let name = artifact_name(&inst, method);
                let grouped = batches.group(self.events(Stage::Features, &inst, method, &batches)?);
                let mut views = Vec::with_capacity(grouped.len());
                let mut kept = Vec::with_capacity(grouped.len());
                for (label, evs) in batches.labels.iter().zip(&grouped) {
                    let (train_view, _) = dataset(evs, false)?;
                    let (test_view, rows) = dataset(evs, true)?;
                    views.push(BatchViews {
                        label: label.clone(),
                        train: train_view,
                        test: test_view,
                    });
                    kept.push(rows);
                }
                let mut wf: WalkForwardConfig = self.cfg.model.clone();
                wf.tuning.seed = self.cfg.derive_seed(&["train", &inst.symbol, &method.to_string()]);
                let records = walk_forward(&views, &wf)?;

                let mut metrics = Vec::new();
                let mut preds = Vec::new();
                let mut selection =
                    String::from("train_batch\ttest_batch\titerations\tmax_depth\thas_time\tl2_regularization\tcv_precision\tfeatures\n");
                for r in &records {
                    let k = batches.labels.iter().position(|l| *l == r.test_batch).expect("known batch");
                    for ((&event, &p), &y) in kept[k].iter().zip(&r.probabilities).zip(views[k].test.labels()) {
                        preds.push(Prediction {
                            batch: k,
                            event,
                            label: y,
                            probability: p,
                        });
                    }
                    metrics.push(r.metrics.clone());
                    selection.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        r.train_batch,
                        r.test_batch,
                        r.params.iterations,
                        r.params.max_depth,
                        r.params.has_time,
                        r.params.l2_regularization,
                        r.cv_precision,
                        r.selected_features.join(",")
                    ));
                    self.put(&format!("train/models/{name}_b{k}.json"), r.model.to_json()?.as_bytes())?;
                }
                info!("{} {method}: {} walk-forward pairs", inst.symbol, records.len());
                self.put(&format!("train/{name}_metrics.tsv"), metrics_tsv(&metrics).as_bytes())?;
                self.put(&format!("train/{name}_predictions.tsv"), predictions_tsv(&preds).as_bytes())?;
                self.put(&format!("train/{name}_selection.tsv"), selection.as_bytes())?;
            }
        }
        Ok(())
    }

    fn explain(&mut self) -> Result<()> {
        if !self.cfg.explain.enabled {
            info!("explain disabled");
            return Ok(());
        }
        let ex = self.cfg.explain.clone();
        for inst in self.cfg.instruments.clone() {
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let name = artifact_name(&inst, method);
                let grouped = batches.group(self.events(Stage::Features, &inst, method, &batches)?);
                let cfg = &self.cfg;
                let jobs: Vec<(usize, Result<Option<(InteractionMatrix, InteractionMatrix, FootruleRecord)>>)> = grouped
                    .par_iter()
                    .enumerate()
                    .map(|(k, evs)| {
                        let tag = [inst.symbol.as_str(), &method.to_string(), &k.to_string()].join("/");
                        let out = explain_batch(evs, &ex, |what| cfg.derive_seed(&["explain", what, &tag]))
                            .map(|o| o.map(|(p, s, d, null)| (p, s, FootruleRecord { batch: batches.labels[k].clone(), distance: d, null_mean: null.0, null_se: null.1 })));
                        (k, out)
                    })
                    .collect();
                let mut records = Vec::new();
                for (k, res) in jobs {
                    match res? {
                        Some((paths, shap, rec)) => {
                            self.put(&format!("explain/{name}_b{k}_paths.tsv"), paths.to_tsv().as_bytes())?;
                            self.put(&format!("explain/{name}_b{k}_shapley.tsv"), shap.to_tsv().as_bytes())?;
                            records.push(rec);
                        }
                        None => warn!("{name}: batch {} skipped for explanation (single class or too few rows)", batches.labels[k]),
                    }
                }
                self.put(&format!("explain/{name}_footrule.tsv"), footrule_tsv(&records).as_bytes())?;
            }
        }
        Ok(())
    }

    fn backtest(&mut self) -> Result<()> {
        let bt = self.cfg.backtest.clone();
        for inst in self.cfg.instruments.clone() {
            let spec = inst.spec();
            let batches = self.batches(&inst)?;
            for method in self.cfg.methods() {
                let name = artifact_name(&inst, method);
                let grouped = batches.group(self.events(Stage::Features, &inst, method, &batches)?);
                let (ppath, ptext) = self.input(&format!("train/{name}_predictions.tsv"), Stage::Train)?;
                let preds = parse_predictions(&ppath, &ptext)?;
                let mut per_batch: BTreeMap<usize, Vec<Signal>> = BTreeMap::new();
                for p in &preds {
                    let event = grouped
                        .get(p.batch)
                        .and_then(|evs| evs.get(p.event))
                        .ok_or_else(|| Error::InvalidInput(format!("{}: prediction for unknown event", ppath.display())))?;
                    if let Some(s) = Signal::from_event(event, p.probability) {
                        per_batch.entry(p.batch).or_default().push(s);
                    }
                }
                let first = preds.iter().map(|p| p.batch).min();
                let mut trades: Vec<TradeRecord> = Vec::new();
                let span: Vec<TickRecord> = match first {
                    Some(f) => batches.ticks[f..].concat(),
                    None => Vec::new(),
                };
                if let Some(f) = first {
                    let base = batches.offsets[f];
                    for (&k, signals) in &per_batch {
                        let shift = batches.offsets[k] - base;
                        let res = simulate(signals, &batches.ticks[k], &spec, &bt.strategy)?;
                        trades.extend(res.trades.into_iter().map(|mut t| {
                            t.entry_tick_index += shift;
                            t.exit_tick_index += shift;
                            t
                        }));
                    }
                }
                let equity = equity_curve(&trades, &span, &spec, &bt.strategy);
                let sharpe = rolling_sharpe(&equity.daily_returns, bt.risk_free_annual, bt.sharpe_window);
                let smoothed = smooth(&sharpe, bt.smooth_days);
                let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
                let mut eq = String::from("day\tcumulative_pnl_ticks\tdaily_return\tsharpe\tsharpe_smoothed\n");
                for i in 0..equity.days.len() {
                    eq.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\n",
                        equity.days[i],
                        equity.cumulative_pnl[i],
                        equity.daily_returns[i],
                        na(sharpe[i]),
                        na(smoothed[i])
                    ));
                }
                info!("{name}: {} trades, final pnl {} ticks", trades.len(), equity.final_pnl());
                self.put(&format!("backtest/{name}_trades.tsv"), trades_tsv(&trades).as_bytes())?;
                self.put(&format!("backtest/{name}_equity.tsv"), eq.as_bytes())?;
            }
        }
        Ok(())
    }

    fn stats(&mut self) -> Result<()> {
        let methods = self.cfg.methods();
        let mut metrics: BTreeMap<(usize, Method), Vec<MetricsRecord>> = BTreeMap::new();
        for (i, inst) in self.cfg.instruments.iter().enumerate() {
            for &m in &methods {
                let (path, text) = self.input(&format!("train/{}_metrics.tsv", artifact_name(inst, m)), Stage::Train)?;
                metrics.insert((i, m), parse_metrics(&path, &text)?);
            }
        }
        let mut comparisons = Vec::new();
        let mut push = |q: ResearchQuestion, conf: String, t: &[MetricsRecord], tm: Measure, c: &[MetricsRecord], cm: Measure| -> Result<()> {
            let (t, c) = align(t, c, &conf);
            let sample = paired_from_metrics(&t, tm, &c, cm)?;
            if sample.is_empty() {
                warn!("{q} {conf}: no paired batches; comparison skipped");
            } else {
                comparisons.push(Comparison {
                    question: q,
                    configuration: conf,
                    sample,
                });
            }
            Ok(())
        };
        let insts = &self.cfg.instruments;
        for (i, inst) in insts.iter().enumerate() {
            for &m in &methods {
                let r = &metrics[&(i, m)];
                push(ResearchQuestion::Rq1, format!("{} {m}", inst.symbol), r, Measure::Precision, r, Measure::NullPrecision)?;
            }
        }
        if methods.contains(&Method::Levels) {
            for (i, inst) in insts.iter().enumerate() {
                for &m in methods.iter().filter(|m| **m != Method::Levels) {
                    push(
                        ResearchQuestion::Rq2,
                        format!("{} {m} vs levels", inst.symbol),
                        &metrics[&(i, m)],
                        Measure::PrAuc,
                        &metrics[&(i, Method::Levels)],
                        Measure::PrAuc,
                    )?;
                }
            }
        }
        if insts.len() >= 2 {
            for &m in methods.iter().filter(|m| **m != Method::Levels) {
                push(
                    ResearchQuestion::Rq3,
                    format!("{m} {} vs {}", insts[0].symbol, insts[1].symbol),
                    &metrics[&(0, m)],
                    Measure::PrAuc,
                    &metrics[&(1, m)],
                    Measure::PrAuc,
                )?;
            }
        }
        if self.cfg.explain.enabled {
            for inst in insts {
                for &m in &methods {
                    let (path, text) = self.input(&format!("explain/{}_footrule.tsv", artifact_name(inst, m)), Stage::Explain)?;
                    let recs = parse_footrule(&path, &text)?;
                    if recs.is_empty() {
                        warn!("RQ4 {} {m}: no explained batches; comparison skipped", inst.symbol);
                        continue;
                    }
                    comparisons.push(Comparison {
                        question: ResearchQuestion::Rq4,
                        configuration: format!("{} {m}", inst.symbol),
                        sample: crate::stats::PairedSample::new(
                            recs.iter().map(|r| r.batch.clone()).collect(),
                            recs.iter().map(|r| r.distance as f64).collect(),
                            recs.iter().map(|r| r.null_mean).collect(),
                        )?,
                    });
                }
            }
        }
        let mut harness = self.cfg.stats;
        harness.bootstrap.seed = self.cfg.derive_seed(&["stats"]);
        let reports = rq_harness(&comparisons, &harness)?;
        for r in &reports {
            info!("{} {}: {}", r.question, r.configuration, r.verdict());
        }
        let mut perf = String::from("instrument\tmethod\tbatch\tprecision\tnull_precision\trecall\tf1\tpr_auc\troc_auc\tn\tpositives\n");
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        for ((i, m), recs) in &metrics {
            for r in recs {
                perf.push_str(&format!(
                    "{}\t{m}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    insts[*i].symbol,
                    r.batch,
                    r.precision,
                    r.null_precision,
                    r.recall,
                    r.f1,
                    na(r.pr_auc),
                    na(r.roc_auc),
                    r.n,
                    r.positives
                ));
            }
        }
        self.put("stats/performance.tsv", perf.as_bytes())?;
        self.put("stats/report.tsv", render_report(&reports).as_bytes())?;
        Ok(())
    }
}

/// Records of the batches present in both groups, in treatment order.
fn align(t: &[MetricsRecord], c: &[MetricsRecord], conf: &str) -> (Vec<MetricsRecord>, Vec<MetricsRecord>) {
    let by_label: BTreeMap<&str, &MetricsRecord> = c.iter().map(|r| (r.batch.as_str(), r)).collect();
    let (mut at, mut ac) = (Vec::new(), Vec::new());
    for r in t {
        if let Some(o) = by_label.get(r.batch.as_str()) {
            at.push(r.clone());
            ac.push((*o).clone());
        }
    }
    let dropped = t.len() + c.len() - 2 * at.len();
    if dropped > 0 {
        warn!("{conf}: {dropped} records without a counterpart batch dropped");
    }
    (at, ac)
}

fn sample_rows(n: usize, amount: usize, seed: u64) -> Vec<usize> {
    if amount >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, amount).into_vec();
    idx.sort_unstable();
    idx
}

type Explained = (InteractionMatrix, InteractionMatrix, u64, (f64, f64));

/// Fits the fixed explanation model on one batch's training view and
/// compares its path-based and Shapley interaction rankings.
fn explain_batch(
    events: &[PatternEvent],
    ex: &super::config::ExplainConfig,
    seed: impl Fn(&str) -> u64,
) -> Result<Option<Explained>> {
    let (full, _) = dataset(events, false)?;
    if !full.has_both_classes() || full.n_rows() < 2 {
        return Ok(None);
    }
    let data = full.select(&ex.features)?;
    let mut params = ex.params;
    params.seed = seed("model");
    let model: GbdtModel = train(&data, &params)?;
    let paths = extract_paths(&model, None)?;
    let pm = interaction_matrix(&ex.features, &paths);
    let background: Dataset = data.take(&sample_rows(data.n_rows(), ex.background_rows, seed("background")));
    let explained: Dataset = data.take(&sample_rows(data.n_rows(), ex.explain_rows, seed("rows")));
    let sm = shapley_interactions(&model, &background, &explained, ex.max_features)?;
    let d = footrule(&rank_matrix(&pm), &rank_matrix(&sm))?;
    let null = bootstrap_null(&pm, &sm, ex.bootstrap_samples, seed("bootstrap"))?;
    let se = null.standard_error();
    Ok(Some((pm, sm, d, (null.mean, se))))
}
