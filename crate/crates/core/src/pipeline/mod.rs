//! End-to-end orchestration: configuration, stage artifacts and the run
//! directory.

mod artifacts;
mod batch;
mod config;
mod run;

pub use artifacts::{
    events_tsv, footrule_tsv, metrics_tsv, parse_events, parse_footrule, parse_metrics, parse_predictions,
    predictions_tsv, FootruleRecord, Prediction, StoredEvent,
};
pub use batch::{dataset, extract, feature_names, process_batch, Method};
pub use config::{BacktestConfig, ExplainConfig, InstrumentConfig, RunConfig};
pub use run::{dry_run_counts, ingest_instrument, FileEntry, Manifest, Run, Stage, StageRecord, LOCK_FILE, MANIFEST_FILE};
