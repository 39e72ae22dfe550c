//! Fixed take-profit/stop-loss strategy over classified events.
//!
//! A positive prediction places a limit order at the event's target level
//! when price triggers the approach. The order fills on the first touch of
//! the level and the position is closed at exactly the take-profit or
//! stop-loss level. Only one order or position exists at a time; later
//! signals are ignored until it is gone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{InstrumentSpec, TickRecord};
use crate::patterns::{PatternEvent, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub take_profit_ticks: f64,
    pub stop_loss_ticks: f64,
    /// Per round trip.
    pub fee_ticks: f64,
    /// Flat deduction per closed trade.
    pub spread_ticks: f64,
    /// Unfilled orders are cancelled this many ticks after event formation.
    pub order_expiry_ticks: usize,
    pub threshold: f64,
    /// Account size in ticks used to turn daily pnl into returns.
    pub notional_ticks: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            take_profit_ticks: 15.0,
            stop_loss_ticks: 3.0,
            fee_ticks: 0.5,
            spread_ticks: 0.0,
            order_expiry_ticks: 5000,
            threshold: 0.5,
            notional_ticks: 1000.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.take_profit_ticks > self.stop_loss_ticks && self.stop_loss_ticks > 0.0) {
            return Err(Error::InvalidConfig("need take_profit > stop_loss > 0".into()));
        }
        if !(self.fee_ticks >= 0.0 && self.spread_ticks >= 0.0) {
            return Err(Error::InvalidConfig("fee and spread must be >= 0".into()));
        }
        if !(self.notional_ticks > 0.0) {
            return Err(Error::InvalidConfig("notional must be positive".into()));
        }
        Ok(())
    }

    fn costs(&self) -> f64 {
        self.fee_ticks + self.spread_ticks
    }
}

/// Precision at which the strategy breaks even.
pub fn profitability_threshold(cfg: &StrategyConfig) -> Result<f64> {
    let win = cfg.take_profit_ticks - cfg.costs();
    if !(win > 0.0) {
        return Err(Error::InvalidConfig("costs exceed the take-profit".into()));
    }
    Ok((cfg.stop_loss_ticks + cfg.costs()) / win)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    TakeProfit,
    StopLoss,
    EndOfData,
}

/// A classified event ready for trading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub target_price_idx: i64,
    pub side: Side,
    pub formation_tick_index: usize,
    pub trigger_tick_index: usize,
    pub probability: f64,
}

impl Signal {
    /// `None` for events that never triggered.
    pub fn from_event(event: &PatternEvent, probability: f64) -> Option<Signal> {
        Some(Signal {
            target_price_idx: event.target_price_idx,
            side: event.side,
            formation_tick_index: event.formation_tick_index,
            trigger_tick_index: event.trigger_tick_index?,
            probability,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub entry_tick_index: usize,
    pub entry_price_idx: i64,
    pub exit_tick_index: usize,
    pub exit_price_idx: f64,
    pub direction: Direction,
    pub pnl_ticks: f64,
    pub exit_reason: ExitReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub days: Vec<i64>,
    /// Cumulative pnl in ticks at each day's close.
    pub cumulative_pnl: Vec<f64>,
    /// Day pnl divided by the notional.
    pub daily_returns: Vec<f64>,
}

impl EquityCurve {
    pub fn final_pnl(&self) -> f64 {
        self.cumulative_pnl.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub trades: Vec<TradeRecord>,
    pub equity: EquityCurve,
}

fn reached(now: i64, level: f64, dir_up: bool) -> bool {
    if dir_up {
        now as f64 >= level
    } else {
        now as f64 <= level
    }
}

fn run_position(ticks: &[TickRecord], fill: usize, entry: i64, dir: Direction, cfg: &StrategyConfig) -> TradeRecord {
    let s = dir.sign();
    let tp = entry as f64 + s * cfg.take_profit_ticks;
    let sl = entry as f64 - s * cfg.stop_loss_ticks;
    let long = dir == Direction::Long;
    let costs = cfg.costs();
    for i in fill..ticks.len() {
        let p = ticks[i].price_idx;
        let (exit, reason) = if reached(p, sl, !long) {
            (sl, ExitReason::StopLoss)
        } else if reached(p, tp, long) {
            (tp, ExitReason::TakeProfit)
        } else {
            continue;
        };
        return TradeRecord {
            entry_tick_index: fill,
            entry_price_idx: entry,
            exit_tick_index: i,
            exit_price_idx: exit,
            direction: dir,
            pnl_ticks: s * (exit - entry as f64) - costs,
            exit_reason: reason,
        };
    }
    let last = ticks.len() - 1;
    let exit = ticks[last].price_idx as f64;
    TradeRecord {
        entry_tick_index: fill,
        entry_price_idx: entry,
        exit_tick_index: last,
        exit_price_idx: exit,
        direction: dir,
        pnl_ticks: s * (exit - entry as f64) - costs,
        exit_reason: ExitReason::EndOfData,
    }
}

/// First tick after `from` that touches or trades through `level`.
fn first_touch(ticks: &[TickRecord], from: usize, until: usize, level: i64) -> Option<usize> {
    let mut prev = ticks[from].price_idx;
    for (i, t) in ticks.iter().enumerate().take(until.min(ticks.len() - 1) + 1).skip(from + 1) {
        let p = t.price_idx;
        if p == level || (prev - level).signum() * (p - level).signum() < 0 {
            return Some(i);
        }
        prev = p;
    }
    None
}

/// Runs the strategy over `signals` on one tick stream.
pub fn simulate(
    signals: &[Signal],
    ticks: &[TickRecord],
    instrument: &InstrumentSpec,
    cfg: &StrategyConfig,
) -> Result<BacktestResult> {
    cfg.validate()?;
    let mut order: Vec<&Signal> = signals.iter().filter(|s| s.probability >= cfg.threshold).collect();
    order.sort_by_key(|s| (s.trigger_tick_index, s.formation_tick_index));
    let mut trades = Vec::new();
    // Last tick at which the previous order or position was still alive.
    let mut busy_until: Option<usize> = None;
    for s in order {
        if ticks.is_empty() || s.trigger_tick_index >= ticks.len() {
            continue;
        }
        if busy_until.is_some_and(|b| s.trigger_tick_index <= b) {
            continue;
        }
        let dir = match s.side {
            Side::TargetBelow => Direction::Long,
            Side::TargetAbove => Direction::Short,
        };
        let expiry = s.formation_tick_index.saturating_add(cfg.order_expiry_ticks);
        match first_touch(ticks, s.trigger_tick_index, expiry, s.target_price_idx) {
            Some(fill) => {
                let t = run_position(ticks, fill, s.target_price_idx, dir, cfg);
                busy_until = Some(t.exit_tick_index);
                trades.push(t);
            }
            None => busy_until = Some(expiry.min(ticks.len() - 1)),
        }
    }
    let equity = equity_curve(&trades, ticks, instrument, cfg);
    Ok(BacktestResult { trades, equity })
}

/// Daily equity over the trading days present in `ticks`; trades book on
/// their exit day.
pub fn equity_curve(
    trades: &[TradeRecord],
    ticks: &[TickRecord],
    instrument: &InstrumentSpec,
    cfg: &StrategyConfig,
) -> EquityCurve {
    let mut days: Vec<i64> = Vec::new();
    for t in ticks {
        let d = instrument.trading_day(t.end_ts_ms);
        if days.last() != Some(&d) {
            days.push(d);
        }
    }
    let mut day_pnl = vec![0.0; days.len()];
    for tr in trades {
        let d = instrument.trading_day(ticks[tr.exit_tick_index].end_ts_ms);
        let k = days.partition_point(|&x| x < d);
        day_pnl[k] += tr.pnl_ticks;
    }
    let mut cum = 0.0;
    let cumulative_pnl = day_pnl
        .iter()
        .map(|p| {
            cum += p;
            cum
        })
        .collect();
    let daily_returns = day_pnl.iter().map(|p| p / cfg.notional_ticks).collect();
    EquityCurve {
        days,
        cumulative_pnl,
        daily_returns,
    }
}

/// Annualized Sharpe of the trailing `window` daily returns: value `d` uses
/// returns `d - window .. d`, so the first defined index is `window`.
/// Windows with zero spread are gaps.
pub fn rolling_sharpe(daily_returns: &[f64], risk_free_annual: f64, window: usize) -> Vec<Option<f64>> {
    assert!(window >= 2, "Sharpe window needs at least 2 days");
    let rf = risk_free_annual / 252.0;
    (0..daily_returns.len())
        .map(|d| {
            if d < window {
                return None;
            }
            let w = &daily_returns[d - window..d];
            let mean = w.iter().sum::<f64>() / window as f64;
            let var = w.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (window as f64 - 1.0);
            let sd = var.sqrt();
            if sd == 0.0 || sd <= 1e-12 * mean.abs() {
                return None;
            }
            Some((mean - rf) / sd * 252f64.sqrt())
        })
        .collect()
}

/// Trailing mean over the defined values of the last `days` entries.
pub fn smooth(series: &[Option<f64>], days: usize) -> Vec<Option<f64>> {
    (0..series.len())
        .map(|d| {
            let lo = (d + 1).saturating_sub(days);
            let vals: Vec<f64> = series[lo..=d].iter().flatten().copied().collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        })
        .collect()
}

pub fn trades_tsv(trades: &[TradeRecord]) -> String {
    let mut s = String::from("entry_tick\tentry_price_idx\texit_tick\texit_price_idx\tdirection\tpnl_ticks\texit_reason\n");
    for t in trades {
        let dir = match t.direction {
            Direction::Long => "long",
            Direction::Short => "short",
        };
        let reason = match t.exit_reason {
            ExitReason::TakeProfit => "take_profit",
            ExitReason::StopLoss => "stop_loss",
            ExitReason::EndOfData => "end_of_data",
        };
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{dir}\t{}\t{reason}",
            t.entry_tick_index, t.entry_price_idx, t.exit_tick_index, t.exit_price_idx, t.pnl_ticks
        );
    }
    s
}
