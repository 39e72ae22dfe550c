//! Time & Sales tick ingestion, calendar batching and synthetic streams.
//!
//! Prices are carried as integer tick indices from the moment a record is
//! parsed; nothing downstream compares floating-point prices.

mod batch;
mod io;
mod synthetic;

pub use batch::{split_batches, Batch};
pub use io::{load_ticks, parse_ticks, write_ticks, OrderPolicy};
pub use synthetic::{
    generate_synthetic, PlantedEpisode, PlantedOutcome, StepLaw, SyntheticConfig, SyntheticStream,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contract description needed to turn prices into tick indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub symbol: String,
    pub tick_size: f64,
    /// Optional trading-day boundaries (epoch ms, ascending). When absent,
    /// days roll at 00:00 UTC.
    #[serde(default)]
    pub session_calendar: Option<Vec<i64>>,
}

impl InstrumentSpec {
    pub fn new(symbol: impl Into<String>, tick_size: f64) -> Result<Self> {
        let spec = InstrumentSpec {
            symbol: symbol.into(),
            tick_size,
            session_calendar: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick_size.is_finite() && self.tick_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tick_size must be positive, got {}",
                self.tick_size
            )));
        }
        if let Some(cal) = &self.session_calendar {
            if cal.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "session_calendar must be strictly ascending".into(),
                ));
            }
        }
        Ok(())
    }

    /// Trading-day ordinal for a timestamp. With a session calendar the day
    /// is the index of the last boundary at or before `ts_ms`; otherwise it
    /// is the UTC calendar day.
    pub fn trading_day(&self, ts_ms: i64) -> i64 {
        match &self.session_calendar {
            Some(cal) if !cal.is_empty() => cal.partition_point(|&b| b <= ts_ms) as i64 - 1,
            _ => ts_ms.div_euclid(86_400_000),
        }
    }
}

/// One aggregated trade event.
///
/// `bid_*` fields count aggressive sellers hitting the bid, `ask_*` fields
/// aggressive buyers lifting the ask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickRecord {
    pub start_ts_ms: i64,
    pub end_ts_ms: i64,
    pub price_idx: i64,
    pub bid_volume: u64,
    pub ask_volume: u64,
    pub bid_trades: u64,
    pub ask_trades: u64,
}

impl TickRecord {
    pub fn total_volume(&self) -> u64 {
        self.bid_volume + self.ask_volume
    }

    /// Checks the record-level invariants, returning a short reason on failure.
    pub fn check(&self) -> std::result::Result<(), &'static str> {
        if self.end_ts_ms < self.start_ts_ms {
            return Err("end timestamp precedes start timestamp");
        }
        let side_ok = |vol: u64, trades: u64| {
            if trades == 0 {
                vol == 0
            } else {
                vol >= trades
            }
        };
        if !side_ok(self.bid_volume, self.bid_trades) || !side_ok(self.ask_volume, self.ask_trades)
        {
            return Err("trade/volume consistency");
        }
        Ok(())
    }
}
