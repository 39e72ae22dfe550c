//! Reversal/crossing labels for pattern events.
//!
//! Scanning forward from formation, an event goes through three phases:
//!
//! * **arm**: price enters the band within `approach_ticks` of the target.
//!   Leaving the band disarms; the arming tick of the final approach is the
//!   trigger used to anchor market-shift features.
//! * **touch**: the first tick at the target, or the first tick on the far
//!   side of it when a price gap skips the target. The approach side is the
//!   side of the tick just before.
//! * **resolve**: `reversal_ticks` back on the approach side is a positive,
//!   `crossing_ticks` strictly past the target is a negative, and a
//!   reversal after a shallow crossing (1 to `crossing_ticks - 1`) is
//!   excluded.
//!
//! Events that do not resolve within `expiry_ticks` of formation, or before
//! the batch ends, stay unresolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::TickRecord;
use crate::patterns::{Label, PatternEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub reversal_ticks: i64,
    pub crossing_ticks: i64,
    pub approach_ticks: i64,
    pub expiry_ticks: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            reversal_ticks: 15,
            crossing_ticks: 3,
            approach_ticks: 2,
            expiry_ticks: 5000,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reversal_ticks > self.crossing_ticks && self.crossing_ticks > 0) {
            return Err(Error::InvalidConfig(format!(
                "need reversal_ticks > crossing_ticks > 0, got {} and {}",
                self.reversal_ticks, self.crossing_ticks
            )));
        }
        if self.approach_ticks < 1 {
            return Err(Error::InvalidConfig("approach_ticks must be >= 1".into()));
        }
        Ok(())
    }
}

/// Resolves `event` against the ticks of its batch.
pub fn label_event(event: &PatternEvent, ticks: &[TickRecord], cfg: &LabelConfig) -> PatternEvent {
    let mut out = event.clone();
    out.label = Label::Unresolved;
    out.trigger_tick_index = None;
    out.touch_tick_index = None;
    out.resolution_tick_index = None;
    out.approach_sign = None;

    let x = event.target_price_idx;
    let start = event.formation_tick_index;
    if start >= ticks.len() {
        return out;
    }
    let last = ticks.len().min(start.saturating_add(cfg.expiry_ticks).saturating_add(1));

    let mut armed: Option<(usize, i64)> = None;
    let mut touch = None;
    for i in start + 1..last {
        let d = ticks[i].price_idx - x;
        let prev = ticks[i - 1].price_idx - x;
        if d == 0 || (prev != 0 && d.signum() != prev.signum()) {
            if i == start + 1 && d == 0 {
                // Approach side undefined.
                return out;
            }
            touch = Some((i, prev.signum()));
            break;
        }
        if d.abs() <= cfg.approach_ticks {
            if armed.map_or(true, |(_, s)| s != d.signum()) {
                armed = Some((i, d.signum()));
            }
        } else {
            armed = None;
        }
    }
    let Some((touch_idx, sign)) = touch else {
        return out;
    };
    out.approach_sign = Some(sign);
    out.touch_tick_index = Some(touch_idx);
    out.trigger_tick_index = Some(match armed {
        Some((idx, s)) if s == sign => idx,
        _ => touch_idx,
    });

    let mut deepest_cross = 0;
    for (i, t) in ticks.iter().enumerate().take(last).skip(touch_idx) {
        let d = (t.price_idx - x) * sign;
        if -d >= cfg.crossing_ticks {
            out.label = Label::Negative;
            out.resolution_tick_index = Some(i);
            return out;
        }
        deepest_cross = deepest_cross.max(-d);
        if d >= cfg.reversal_ticks {
            out.label = if deepest_cross >= 1 {
                Label::Excluded
            } else {
                Label::Positive
            };
            out.resolution_tick_index = Some(i);
            return out;
        }
    }
    out
}

pub fn label_events(events: &[PatternEvent], ticks: &[TickRecord], cfg: &LabelConfig) -> Vec<PatternEvent> {
    events.iter().map(|e| label_event(e, ticks, cfg)).collect()
}

/// Counts of each disposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub excluded: usize,
    pub unresolved: usize,
}

impl LabelCounts {
    pub fn of(events: &[PatternEvent]) -> Self {
        let mut c = LabelCounts::default();
        for e in events {
            match e.label {
                Label::Positive => c.positive += 1,
                Label::Negative => c.negative += 1,
                Label::Excluded => c.excluded += 1,
                Label::Unresolved => c.unresolved += 1,
            }
        }
        c
    }
}

/// Events usable for training: positives and negatives only.
pub fn training_view(events: &[PatternEvent]) -> Vec<PatternEvent> {
    events
        .iter()
        .filter(|e| matches!(e.label, Label::Positive | Label::Negative))
        .cloned()
        .collect()
}

/// Events used for evaluation: excluded entries count as negatives.
pub fn test_view(events: &[PatternEvent]) -> Vec<PatternEvent> {
    events
        .iter()
        .filter(|e| e.label != Label::Unresolved)
        .map(|e| {
            let mut e = e.clone();
            if e.label == Label::Excluded {
                e.label = Label::Negative;
            }
            e
        })
        .collect()
}
