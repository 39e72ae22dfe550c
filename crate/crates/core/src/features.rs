//! Pattern (P0-P14) and market-shift (MS0-MS3) features.
//!
//! Pattern ratios compare the aggregates of the five levels above the target
//! (`t` in 1..=5) with the five below (`t` in -5..=-1). For price-level
//! events only one side of the target has data, so `t = -k` reads the level
//! `2k - 1` ticks from the target on the approach side and `t = +k` reads the
//! level `2k` ticks away. Levels outside the event's own profile are filled
//! from the trailing long window ending at formation.
//!
//! P2 is the ask-trade ratio and P3 the bid-trade ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::TickRecord;
use crate::patterns::{LevelAggregate, PatternEvent, PatternKind, Side};

pub const FEATURE_NAMES: [&str; 23] = [
    "P0", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10", "P11", "P12_-1", "P12_0",
    "P12_+1", "P13_-1", "P13_0", "P13_+1", "P14", "MS0", "MS1", "MS2", "MS3",
];

pub const MISSING_TOKEN: &str = "NA";

const NEIGHBOURS: i64 = 5;

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// Values aligned with [`FEATURE_NAMES`]; `None` is Missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<Option<f64>>);

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector(vec![None; FEATURE_NAMES.len()])
    }
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).and_then(|i| self.0[i])
    }

    fn set(&mut self, name: &str, value: Option<f64>) {
        let i = feature_index(name).expect("known feature");
        self.0[i] = value.filter(|v| v.is_finite());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub long_window: usize,
    pub short_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            long_window: 237,
            short_window: 21,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.short_window == 0 || self.long_window <= self.short_window {
            return Err(Error::InvalidConfig(format!(
                "need long_window > short_window > 0, got {} and {}",
                self.long_window, self.short_window
            )));
        }
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

fn sum<F: Fn(&LevelAggregate) -> u64>(levels: &[LevelAggregate], f: F) -> u64 {
    levels.iter().map(f).sum()
}

/// Aggregates the neighbourhood of the target: `upper[k-1]` is `t = k`,
/// `lower[k-1]` is `t = -k`.
struct Neighbourhood {
    target: LevelAggregate,
    upper: Vec<LevelAggregate>,
    lower: Vec<LevelAggregate>,
}

impl Neighbourhood {
    fn collect(event: &PatternEvent, ticks: &[TickRecord], cfg: &FeatureConfig) -> Self {
        let x = event.target_price_idx;
        let end = event.formation_tick_index.min(ticks.len().saturating_sub(1));
        let begin = (end + 1).saturating_sub(cfg.long_window);
        let trailing = &ticks[begin..=end];
        let level_at = |price: i64| {
            if event.profile.contains(price) {
                event.profile.at(price)
            } else {
                let mut agg = LevelAggregate::default();
                trailing.iter().filter(|t| t.price_idx == price).for_each(|t| agg.add(t));
                agg
            }
        };
        let price_of = |t: i64| -> i64 {
            match event.kind {
                PatternKind::Vcrb => x + t,
                PatternKind::PriceLevel => {
                    let distance = if t < 0 { -2 * t - 1 } else { 2 * t };
                    // Data exists only on the side the market was on.
                    match event.side {
                        Side::TargetAbove => x - distance,
                        Side::TargetBelow => x + distance,
                    }
                }
            }
        };
        Neighbourhood {
            target: level_at(x),
            upper: (1..=NEIGHBOURS).map(|t| level_at(price_of(t))).collect(),
            lower: (1..=NEIGHBOURS).map(|t| level_at(price_of(-t))).collect(),
        }
    }

    fn at(&self, t: i64) -> &LevelAggregate {
        match t {
            0 => &self.target,
            t if t > 0 => &self.upper[(t - 1) as usize],
            t => &self.lower[(-t - 1) as usize],
        }
    }
}

/// Pattern features P0-P14 for a VCRB or price-level event.
pub fn pattern_features(event: &PatternEvent, ticks: &[TickRecord], cfg: &FeatureConfig) -> FeatureVector {
    let n = Neighbourhood::collect(event, ticks, cfg);
    let (up, lo) = (&n.upper, &n.lower);
    let vb = |l: &LevelAggregate| l.bid_volume;
    let va = |l: &LevelAggregate| l.ask_volume;
    let tb = |l: &LevelAggregate| l.bid_trades;
    let ta = |l: &LevelAggregate| l.ask_trades;
    let cnt = |l: &LevelAggregate| l.ticks;

    let mut fv = FeatureVector::default();
    fv.set("P0", ratio(sum(up, vb), sum(lo, vb)));
    fv.set("P1", ratio(sum(up, va), sum(lo, va)));
    fv.set("P2", ratio(sum(up, ta), sum(lo, ta)));
    fv.set("P3", ratio(sum(up, tb), sum(lo, tb)));
    fv.set("P4", ratio(sum(up, vb), sum(up, cnt)));
    fv.set("P5", ratio(sum(up, va), sum(up, cnt)));
    fv.set("P6", ratio(sum(lo, vb), sum(lo, cnt)));
    fv.set("P7", ratio(sum(lo, va), sum(lo, cnt)));
    fv.set("P8", ratio(n.target.bid_volume, sum(up, vb)));
    fv.set("P9", ratio(n.target.ask_volume, sum(up, va)));
    fv.set("P10", ratio(n.target.bid_volume, sum(lo, vb)));
    fv.set("P11", ratio(n.target.ask_volume, sum(lo, va)));
    for (t, suffix) in [(-1, "-1"), (0, "0"), (1, "+1")] {
        let l = n.at(t);
        fv.set(&format!("P12_{suffix}"), ratio(l.bid_volume, l.ask_volume));
        fv.set(&format!("P13_{suffix}"), ratio(l.bid_trades, l.ask_trades));
    }
    fv.set(
        "P14",
        Some(match event.side {
            Side::TargetAbove => 1.0,
            Side::TargetBelow => 0.0,
        }),
    );
    fv
}

/// Writes MS0-MS3 into `fv` from the windows ending at the trigger tick.
pub fn market_shift_features(
    fv: &mut FeatureVector,
    ticks: &[TickRecord],
    trigger_tick_index: Option<usize>,
    cfg: &FeatureConfig,
) {
    let window = |len: usize| -> Option<(u64, u64, u64, u64)> {
        let end = trigger_tick_index?;
        if end >= ticks.len() || end + 1 < len {
            return None;
        }
        Some(ticks[end + 1 - len..=end].iter().fold((0, 0, 0, 0), |acc, t| {
            (
                acc.0 + t.bid_volume,
                acc.1 + t.ask_volume,
                acc.2 + t.bid_trades,
                acc.3 + t.ask_trades,
            )
        }))
    };
    let long = window(cfg.long_window);
    let short = window(cfg.short_window);
    let vol = |w: Option<(u64, u64, u64, u64)>| w.and_then(|(b, a, _, _)| ratio(b, a));
    let trd = |w: Option<(u64, u64, u64, u64)>| w.and_then(|(_, _, b, a)| ratio(b, a));
    let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    fv.set("MS0", vol(long));
    fv.set("MS1", trd(long));
    fv.set("MS2", diff(vol(long), vol(short)));
    fv.set("MS3", diff(trd(long), trd(short)));
}

/// Full feature vector for a labelled event.
pub fn compute_features(event: &PatternEvent, ticks: &[TickRecord], cfg: &FeatureConfig) -> FeatureVector {
    let mut fv = pattern_features(event, ticks, cfg);
    market_shift_features(&mut fv, ticks, event.trigger_tick_index, cfg);
    fv
}

/// Attaches features to every event.
pub fn annotate(events: &mut [PatternEvent], ticks: &[TickRecord], cfg: &FeatureConfig) {
    for e in events.iter_mut() {
        e.features = Some(compute_features(e, ticks, cfg));
    }
}
