use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{annotate, FeatureConfig, FEATURE_NAMES};
use crate::gbdt::Dataset;
use crate::labeling::{label_events, LabelConfig};
use crate::market_data::TickRecord;
use crate::patterns::{extract_price_levels, extract_vcrb, Label, PatternEvent, PriceLevelConfig};

/// Pattern extraction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Vcrb(u32),
    Levels,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Vcrb(r) => write!(f, "vcrb{r}"),
            Method::Levels => f.write_str("levels"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "levels" {
            return Ok(Method::Levels);
        }
        s.strip_prefix("vcrb")
            .and_then(|r| r.parse().ok())
            .map(Method::Vcrb)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

pub fn extract(ticks: &[TickRecord], method: Method, levels: &PriceLevelConfig) -> Vec<PatternEvent> {
    match method {
        Method::Vcrb(r) => extract_vcrb(ticks, r),
        Method::Levels => extract_price_levels(ticks, levels),
    }
}

/// Extraction, labelling and features for one batch.
pub fn process_batch(
    ticks: &[TickRecord],
    method: Method,
    levels: &PriceLevelConfig,
    labels: &LabelConfig,
    features: &FeatureConfig,
) -> Vec<PatternEvent> {
    let events = extract(ticks, method, levels);
    let mut labelled = label_events(&events, ticks, labels);
    annotate(&mut labelled, ticks, features);
    labelled
}

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Training view (`excluded_as_negative == false`) or test view of labelled
/// events, with the indices of the events kept.
pub fn dataset(events: &[PatternEvent], excluded_as_negative: bool) -> Result<(Dataset, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut kept = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let y = match e.label {
            Label::Positive => true,
            Label::Negative => false,
            Label::Excluded if excluded_as_negative => false,
            _ => continue,
        };
        let fv = e
            .features
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("event without features".into()))?;
        rows.push(fv.0.clone());
        labels.push(y);
        kept.push(i);
    }
    Ok((Dataset::new(feature_names(), rows, labels, true)?, kept))
}
