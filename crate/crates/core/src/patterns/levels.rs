//! Automatic support/resistance detection.
//!
//! An approximation of conventional price-level trading: a price is a
//! resistance candidate when it is the strict maximum of the trailing
//! `lookback_ticks` window; it becomes a registered level once price has
//! retreated `rejection_ticks` below it without trading above it. An event
//! fires when price returns within [`APPROACH_TICKS`] of a registered level.
//! After firing, a level re-arms only after another full rejection, and it is
//! dropped for good once crossed by [`CROSS_TICKS`] or more. Supports mirror
//! all of this.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{PatternEvent, PatternKind, Side, VolumeProfile};
use crate::market_data::TickRecord;

pub const APPROACH_TICKS: i64 = 2;
pub const CROSS_TICKS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceLevelConfig {
    pub lookback_ticks: usize,
    pub rejection_ticks: i64,
}

impl Default for PriceLevelConfig {
    fn default() -> Self {
        PriceLevelConfig {
            lookback_ticks: 500,
            rejection_ticks: 15,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Level {
    price: i64,
    /// +1 resistance, -1 support.
    dir: i64,
    extremum_index: usize,
    armed: bool,
}

/// Sliding-window extremum over the previous `cap` prices.
struct Window {
    cap: usize,
    maxq: VecDeque<(usize, i64)>,
    minq: VecDeque<(usize, i64)>,
}

impl Window {
    fn push(&mut self, i: usize, p: i64) {
        while self.maxq.back().is_some_and(|&(_, q)| q <= p) {
            self.maxq.pop_back();
        }
        self.maxq.push_back((i, p));
        while self.minq.back().is_some_and(|&(_, q)| q >= p) {
            self.minq.pop_back();
        }
        self.minq.push_back((i, p));
    }

    /// Evict entries older than the window ending just before tick `i`.
    fn trim(&mut self, i: usize) {
        let oldest = i.saturating_sub(self.cap);
        while self.maxq.front().is_some_and(|&(j, _)| j < oldest) {
            self.maxq.pop_front();
        }
        while self.minq.front().is_some_and(|&(j, _)| j < oldest) {
            self.minq.pop_front();
        }
    }
}

pub fn extract_price_levels(ticks: &[TickRecord], cfg: &PriceLevelConfig) -> Vec<PatternEvent> {
    assert!(cfg.lookback_ticks >= 1 && cfg.rejection_ticks >= 1, "invalid price-level config");
    let mut window = Window {
        cap: cfg.lookback_ticks,
        maxq: VecDeque::new(),
        minq: VecDeque::new(),
    };
    let mut resistance: Option<(i64, usize)> = None;
    let mut support: Option<(i64, usize)> = None;
    let mut levels: Vec<Level> = Vec::new();
    let mut events = Vec::new();

    for (i, tick) in ticks.iter().enumerate() {
        let p = tick.price_idx;

        levels.retain_mut(|lvl| {
            // Signed distance of price past the level (positive = beyond).
            let beyond = (p - lvl.price) * lvl.dir;
            if beyond >= CROSS_TICKS {
                return false;
            }
            if lvl.armed && beyond >= -APPROACH_TICKS {
                let side = match lvl.dir {
                    1 if p <= lvl.price => Side::TargetAbove,
                    -1 if p >= lvl.price => Side::TargetBelow,
                    _ => Side::of(lvl.price, p),
                };
                let profile = VolumeProfile::from_ticks(&ticks[lvl.extremum_index..=i]);
                events.push(PatternEvent::new(
                    PatternKind::PriceLevel,
                    lvl.price,
                    lvl.extremum_index,
                    i,
                    side,
                    profile,
                ));
                lvl.armed = false;
            } else if !lvl.armed && beyond <= -cfg.rejection_ticks {
                lvl.armed = true;
            }
            true
        });

        let mut register = |cand: &mut Option<(i64, usize)>, dir: i64| {
            if let Some((price, idx)) = *cand {
                let beyond = (p - price) * dir;
                if beyond > 0 {
                    *cand = None;
                } else if beyond <= -cfg.rejection_ticks {
                    if !levels.iter().any(|l| l.price == price && l.dir == dir) {
                        levels.push(Level {
                            price,
                            dir,
                            extremum_index: idx,
                            armed: true,
                        });
                    }
                    *cand = None;
                }
            }
        };
        register(&mut resistance, 1);
        register(&mut support, -1);

        window.trim(i);
        if let (Some(&(_, hi)), Some(&(_, lo))) = (window.maxq.front(), window.minq.front()) {
            if p > hi {
                resistance = Some((p, i));
            }
            if p < lo {
                support = Some((p, i));
            }
        }
        window.push(i, p);
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(prices: &[i64]) -> Vec<TickRecord> {
        prices
            .iter()
            .map(|&p| TickRecord {
                start_ts_ms: 0,
                end_ts_ms: 0,
                price_idx: p,
                bid_volume: 1,
                ask_volume: 1,
                bid_trades: 1,
                ask_trades: 1,
            })
            .collect()
    }

    fn cfg() -> PriceLevelConfig {
        PriceLevelConfig {
            lookback_ticks: 50,
            rejection_ticks: 15,
        }
    }

    #[test]
    fn flat_series_has_no_levels() {
        assert!(extract_price_levels(&ticks(&[100; 300]), &cfg()).is_empty());
    }

    #[test]
    fn rejection_and_return_gives_one_resistance_event() {
        let mut prices: Vec<i64> = (80..=100).collect(); // rise to 100 at index 20
        prices.extend((80..100).rev()); // fall 20 ticks to 80
        prices.extend(81..=98); // return to 98
        let events = extract_price_levels(&ticks(&prices), &cfg());
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.target_price_idx, 100);
        assert_eq!(e.kind, PatternKind::PriceLevel);
        assert_eq!(e.side, Side::TargetAbove);
        assert_eq!(e.first_tick_index, 20);
        assert_eq!(e.formation_tick_index, prices.len() - 1);
        assert_eq!(prices[e.formation_tick_index], 98);
    }

    #[test]
    fn crossed_level_is_dropped() {
        let mut prices: Vec<i64> = (80..=100).collect();
        prices.extend((80..100).rev());
        prices.extend([90, 103, 85, 99]);
        // Jumping from 90 straight to 103 crosses without an approach event.
        let events = extract_price_levels(&ticks(&prices), &cfg());
        assert!(events.iter().all(|e| e.target_price_idx != 100));
    }

    #[test]
    fn mirrored_support() {
        let mut prices: Vec<i64> = (100..=120).rev().collect();
        prices.extend(101..=120);
        prices.extend((102..120).rev());
        let events = extract_price_levels(&ticks(&prices), &cfg());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].target_price_idx, 100);
        assert_eq!(events[0].side, Side::TargetBelow);
    }
}
