//! Tab-separated stage artifacts. Missing values are written as `NA`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_NAMES, MISSING_TOKEN};
use crate::market_data::TickRecord;
use crate::patterns::{PatternEvent, VolumeProfile};
use crate::stats::MetricsRecord;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| MISSING_TOKEN.to_string(), |v| v.to_string())
}

struct Table<'a> {
    path: &'a Path,
    header: Vec<&'a str>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Table<'a> {
    fn parse(path: &'a Path, text: &'a str, expected: &[&str]) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::Parse {
            path: path.into(),
            line: 1,
            message: "empty file".into(),
        })?;
        let header: Vec<&str> = head.split('\t').collect();
        if header.len() < expected.len() || header[..expected.len()] != *expected {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("header must start with {}", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, l) in lines {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != header.len() {
                return Err(Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: format!("{} fields, expected {}", fields.len(), header.len()),
                });
            }
            rows.push((i + 1, fields));
        }
        Ok(Table { path, header, rows })
    }

    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.path.into(),
            line,
            message,
        }
    }

    fn get<T: std::str::FromStr>(&self, line: usize, field: &str, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        field
            .parse()
            .map_err(|e| self.err(line, format!("column {}: {e}", self.header[col])))
    }

    fn get_opt<T: std::str::FromStr>(&self, line: usize, field: &str, col: usize) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if field == MISSING_TOKEN {
            Ok(None)
        } else {
            self.get(line, field, col).map(Some)
        }
    }
}

/// One event of a batch, as stored between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredEvent {
    pub batch: usize,
    pub event: PatternEvent,
}

const EVENT_COLUMNS: [&str; 11] = [
    "batch",
    "kind",
    "target_price_idx",
    "first_tick",
    "formation_tick",
    "side",
    "trigger_tick",
    "touch_tick",
    "resolution_tick",
    "approach_sign",
    "label",
];

/// Event table; the feature columns follow when `with_features` is set.
pub fn events_tsv(events: &[StoredEvent], with_features: bool) -> String {
    let mut s = EVENT_COLUMNS.join("\t");
    if with_features {
        for n in FEATURE_NAMES {
            s.push('\t');
            s.push_str(n);
        }
    }
    s.push('\n');
    for StoredEvent { batch, event: e } in events {
        let _ = write!(
            s,
            "{batch}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.kind,
            e.target_price_idx,
            e.first_tick_index,
            e.formation_tick_index,
            e.side,
            opt(e.trigger_tick_index),
            opt(e.touch_tick_index),
            opt(e.resolution_tick_index),
            opt(e.approach_sign),
            e.label
        );
        if with_features {
            let missing = FeatureVector::default();
            for v in &e.features.as_ref().unwrap_or(&missing).0 {
                s.push('\t');
                s.push_str(&opt(*v));
            }
        }
        s.push('\n');
    }
    s
}

/// Parses an event table; profiles are rebuilt from the batch ticks.
pub fn parse_events(path: &Path, text: &str, batches: &[&[TickRecord]]) -> Result<Vec<StoredEvent>> {
    let t = Table::parse(path, text, &EVENT_COLUMNS)?;
    let with_features = match t.header.len() - 11 {
        0 => false,
        n if n == FEATURE_NAMES.len() && t.header[11..] == FEATURE_NAMES => true,
        _ => return Err(t.err(1, "unexpected feature columns".into())),
    };
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let line = *line;
        let batch: usize = t.get(line, f[0], 0)?;
        let ticks = batches
            .get(batch)
            .ok_or_else(|| t.err(line, format!("batch {batch} does not exist")))?;
        let first: usize = t.get(line, f[3], 3)?;
        let formation: usize = t.get(line, f[4], 4)?;
        if first > formation || formation >= ticks.len() {
            return Err(t.err(line, "tick indices outside the batch".into()));
        }
        let text_enum = |col: usize| t.err(line, format!("bad {}: '{}'", t.header[col], f[col]));
        let mut event = PatternEvent::new(
            f[1].parse().map_err(|_| text_enum(1))?,
            t.get(line, f[2], 2)?,
            first,
            formation,
            f[5].parse().map_err(|_| text_enum(5))?,
            VolumeProfile::from_ticks(&ticks[first..=formation]),
        );
        event.trigger_tick_index = t.get_opt(line, f[6], 6)?;
        event.touch_tick_index = t.get_opt(line, f[7], 7)?;
        event.resolution_tick_index = t.get_opt(line, f[8], 8)?;
        event.approach_sign = t.get_opt(line, f[9], 9)?;
        event.label = f[10].parse().map_err(|_| text_enum(10))?;
        if with_features {
            let mut fv = Vec::with_capacity(FEATURE_NAMES.len());
            for (k, v) in f[11..].iter().enumerate() {
                fv.push(t.get_opt::<f64>(line, v, 11 + k)?);
            }
            event.features = Some(FeatureVector(fv));
        }
        out.push(StoredEvent { batch, event });
    }
    Ok(out)
}

const METRIC_COLUMNS: [&str; 9] = [
    "batch",
    "precision",
    "recall",
    "f1",
    "pr_auc",
    "roc_auc",
    "null_precision",
    "n",
    "positives",
];

pub fn metrics_tsv(records: &[MetricsRecord]) -> String {
    let mut s = METRIC_COLUMNS.join("\t");
    s.push('\n');
    for m in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.batch,
            m.precision,
            m.recall,
            m.f1,
            opt(m.pr_auc),
            opt(m.roc_auc),
            m.null_precision,
            m.n,
            m.positives
        );
    }
    s
}

pub fn parse_metrics(path: &Path, text: &str) -> Result<Vec<MetricsRecord>> {
    let t = Table::parse(path, text, &METRIC_COLUMNS)?;
    t.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            Ok(MetricsRecord {
                batch: f[0].to_string(),
                precision: t.get(line, f[1], 1)?,
                recall: t.get(line, f[2], 2)?,
                f1: t.get(line, f[3], 3)?,
                pr_auc: t.get_opt(line, f[4], 4)?,
                roc_auc: t.get_opt(line, f[5], 5)?,
                null_precision: t.get(line, f[6], 6)?,
                n: t.get(line, f[7], 7)?,
                positives: t.get(line, f[8], 8)?,
            })
        })
        .collect()
}

/// Walk-forward test-set probabilities, keyed by batch and event row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub batch: usize,
    /// Row of the event within its batch in the feature table.
    pub event: usize,
    pub label: bool,
    pub probability: f64,
}

pub fn predictions_tsv(preds: &[Prediction]) -> String {
    let mut s = String::from("batch\tevent\tlabel\tprobability\n");
    for p in preds {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", p.batch, p.event, u8::from(p.label), p.probability);
    }
    s
}

pub fn parse_predictions(path: &Path, text: &str) -> Result<Vec<Prediction>> {
    let t = Table::parse(path, text, &["batch", "event", "label", "probability"])?;
    t.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            Ok(Prediction {
                batch: t.get(line, f[0], 0)?,
                event: t.get(line, f[1], 1)?,
                label: t.get::<u8>(line, f[2], 2)? == 1,
                probability: t.get(line, f[3], 3)?,
            })
        })
        .collect()
}

/// Footrule distance between the two interaction rankings of one batch and
/// the bootstrap null mean it is compared with.
#[derive(Debug, Clone, PartialEq)]
pub struct FootruleRecord {
    pub batch: String,
    pub distance: u64,
    pub null_mean: f64,
    pub null_se: f64,
}

pub fn footrule_tsv(records: &[FootruleRecord]) -> String {
    let mut s = String::from("batch\tdistance\tnull_mean\tnull_se\n");
    for r in records {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.batch, r.distance, r.null_mean, r.null_se);
    }
    s
}

pub fn parse_footrule(path: &Path, text: &str) -> Result<Vec<FootruleRecord>> {
    let t = Table::parse(path, text, &["batch", "distance", "null_mean", "null_se"])?;
    t.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            Ok(FootruleRecord {
                batch: f[0].to_string(),
                distance: t.get(line, f[1], 1)?,
                null_mean: t.get(line, f[2], 2)?,
                null_se: t.get(line, f[3], 3)?,
            })
        })
        .collect()
}
