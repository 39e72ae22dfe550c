use serde::{Deserialize, Serialize};

use crate::market_data::TickRecord;

/// Per-price aggregate of the ticks traded at that price.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub bid_volume: u64,
    pub ask_volume: u64,
    pub bid_trades: u64,
    pub ask_trades: u64,
    /// Number of tick records at the price.
    pub ticks: u64,
}

impl LevelAggregate {
    pub fn add(&mut self, t: &TickRecord) {
        self.bid_volume += t.bid_volume;
        self.ask_volume += t.ask_volume;
        self.bid_trades += t.bid_trades;
        self.ask_trades += t.ask_trades;
        self.ticks += 1;
    }

    pub fn merge(&mut self, other: &LevelAggregate) {
        self.bid_volume += other.bid_volume;
        self.ask_volume += other.ask_volume;
        self.bid_trades += other.bid_trades;
        self.ask_trades += other.ask_trades;
        self.ticks += other.ticks;
    }

    pub fn total_volume(&self) -> u64 {
        self.bid_volume + self.ask_volume
    }
}

/// Contiguous per-price histogram starting at `base_price_idx`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeProfile {
    pub base_price_idx: i64,
    pub levels: Vec<LevelAggregate>,
}

impl VolumeProfile {
    /// Builds the profile of a non-empty tick slice.
    pub fn from_ticks(ticks: &[TickRecord]) -> Self {
        let lo = ticks.iter().map(|t| t.price_idx).min().unwrap_or(0);
        let hi = ticks.iter().map(|t| t.price_idx).max().unwrap_or(0);
        let mut levels = vec![LevelAggregate::default(); (hi - lo + 1) as usize];
        for t in ticks {
            levels[(t.price_idx - lo) as usize].add(t);
        }
        VolumeProfile {
            base_price_idx: lo,
            levels,
        }
    }

    pub fn max_price_idx(&self) -> i64 {
        self.base_price_idx + self.levels.len() as i64 - 1
    }

    pub fn contains(&self, price_idx: i64) -> bool {
        price_idx >= self.base_price_idx && price_idx <= self.max_price_idx()
    }

    /// Aggregate at a price; zero outside the profile.
    pub fn at(&self, price_idx: i64) -> LevelAggregate {
        if self.contains(price_idx) {
            self.levels[(price_idx - self.base_price_idx) as usize]
        } else {
            LevelAggregate::default()
        }
    }

    pub fn total_volume(&self) -> u64 {
        self.levels.iter().map(LevelAggregate::total_volume).sum()
    }

    /// The centre price when the profile has an odd number of levels and
    /// the centre holds the unique maximum total volume.
    pub fn centred_poc(&self) -> Option<i64> {
        if self.levels.len() % 2 == 0 {
            return None;
        }
        let centre = self.levels.len() / 2;
        let peak = self.levels[centre].total_volume();
        let unique = self
            .levels
            .iter()
            .enumerate()
            .all(|(i, l)| i == centre || l.total_volume() < peak);
        unique.then(|| self.base_price_idx + centre as i64)
    }
}
