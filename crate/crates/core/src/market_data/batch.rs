use chrono::{DateTime, Datelike, Months, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::TickRecord;

/// A calendar-aligned slice of the tick stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub label: String,
    pub start_ts: i64,
    pub end_ts: i64,
    pub ticks: Vec<TickRecord>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Builds a batch from ticks with bounds taken from the data itself.
    pub fn from_ticks(label: impl Into<String>, ticks: Vec<TickRecord>) -> Self {
        let start_ts = ticks.first().map_or(0, |t| t.start_ts_ms);
        let end_ts = ticks.last().map_or(0, |t| t.start_ts_ms + 1);
        Batch {
            label: label.into(),
            start_ts,
            end_ts,
            ticks,
        }
    }
}

fn month_start(ts_ms: i64) -> NaiveDate {
    let dt: DateTime<Utc> = Utc
        .timestamp_millis_opt(ts_ms)
        .single()
        .unwrap_or_else(|| Utc.timestamp_millis_opt(0).unwrap());
    NaiveDate::from_ymd_opt(dt.year(), dt.month(), 1).expect("valid month start")
}

fn to_ms(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
        .timestamp_millis()
}

fn month_label(date: NaiveDate) -> String {
    format!("{}/{:02}", date.month(), date.year().rem_euclid(100))
}

/// Splits a time-ordered stream into consecutive batches of
/// `months_per_batch` calendar months, anchored at the first tick's month.
///
/// Labels read like `"3/17 to 6/17"`. Empty intermediate batches are kept.
pub fn split_batches(ticks: &[TickRecord], months_per_batch: u32) -> Vec<Batch> {
    assert!(months_per_batch >= 1, "months_per_batch must be >= 1");
    let Some(first) = ticks.first() else {
        return Vec::new();
    };
    let last_ts = ticks.iter().map(|t| t.start_ts_ms).max().unwrap_or(first.start_ts_ms);
    let mut batches = Vec::new();
    let mut lo = month_start(first.start_ts_ms);
    let mut cursor = 0usize;
    loop {
        let hi = lo + Months::new(months_per_batch);
        let (lo_ms, hi_ms) = (to_ms(lo), to_ms(hi));
        let begin = cursor;
        while cursor < ticks.len() && ticks[cursor].start_ts_ms < hi_ms {
            cursor += 1;
        }
        batches.push(Batch {
            label: format!("{} to {}", month_label(lo), month_label(hi)),
            start_ts: lo_ms,
            end_ts: hi_ms,
            ticks: ticks[begin..cursor].to_vec(),
        });
        if last_ts < hi_ms {
            break;
        }
        lo = hi;
    }
    batches
}
