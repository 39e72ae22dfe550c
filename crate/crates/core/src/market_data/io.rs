use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;

use super::{InstrumentSpec, TickRecord};
use crate::error::{Error, Result};

/// What to do when start timestamps go backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    #[default]
    Reject,
    WarnAndSort,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Reads a tick file (plain or `.gz`) into records, in file order.
pub fn load_ticks(path: &Path, spec: &InstrumentSpec, policy: OrderPolicy) -> Result<Vec<TickRecord>> {
    spec.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_ticks(BufReader::new(reader), path, spec, policy)
}

/// Parses tick lines from any reader. `origin` is only used in error messages.
pub fn parse_ticks<R: BufRead>(
    reader: R,
    origin: &Path,
    spec: &InstrumentSpec,
    policy: OrderPolicy,
) -> Result<Vec<TickRecord>> {
    let mut ticks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        // Optional header: first field not numeric.
        if ticks.is_empty() && i == 0 && fields[0].parse::<i64>().is_err() {
            continue;
        }
        let tick = parse_line(&fields, spec.tick_size).map_err(|message| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno,
            message,
        })?;
        if let Some(prev) = ticks.last() {
            let prev: &TickRecord = prev;
            if tick.start_ts_ms < prev.start_ts_ms && policy == OrderPolicy::Reject {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno,
                    message: "non-monotonic timestamps".into(),
                });
            }
        }
        ticks.push(tick);
    }
    if policy == OrderPolicy::WarnAndSort && ticks.windows(2).any(|w| w[1].start_ts_ms < w[0].start_ts_ms) {
        warn!("{}: timestamps out of order, sorting", origin.display());
        ticks.sort_by_key(|t| t.start_ts_ms);
    }
    Ok(ticks)
}

fn parse_line(fields: &[&str], tick_size: f64) -> std::result::Result<TickRecord, String> {
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, found {}", fields.len()));
    }
    let int = |idx: usize, name: &str| -> std::result::Result<i64, String> {
        fields[idx]
            .parse::<i64>()
            .map_err(|_| format!("{name}: not an integer: '{}'", fields[idx]))
    };
    let count = |idx: usize, name: &str| -> std::result::Result<u64, String> {
        fields[idx]
            .parse::<u64>()
            .map_err(|_| format!("{name}: not a non-negative integer: '{}'", fields[idx]))
    };
    let price: f64 = fields[2]
        .parse()
        .map_err(|_| format!("price: not a number: '{}'", fields[2]))?;
    if !price.is_finite() {
        return Err("price: not finite".into());
    }
    let tick = TickRecord {
        start_ts_ms: int(0, "start_ts_ms")?,
        end_ts_ms: int(1, "end_ts_ms")?,
        price_idx: price_to_index(price, tick_size)?,
        bid_volume: count(3, "bid_volume")?,
        ask_volume: count(4, "ask_volume")?,
        bid_trades: count(5, "bid_trades")?,
        ask_trades: count(6, "ask_trades")?,
    };
    tick.check().map_err(str::to_string)?;
    Ok(tick)
}

fn price_to_index(price: f64, tick_size: f64) -> std::result::Result<i64, String> {
    let ratio = price / tick_size;
    let idx = ratio.round();
    if (ratio - idx).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(format!("price {price} is not a multiple of tick size {tick_size}"));
    }
    Ok(idx as i64)
}

/// Number of decimals needed to print multiples of `tick_size` exactly.
fn price_decimals(tick_size: f64) -> usize {
    (0..=12)
        .find(|&d| {
            let scaled = tick_size * 10f64.powi(d as i32);
            (scaled - scaled.round()).abs() < 1e-9 * scaled.max(1.0)
        })
        .unwrap_or(12)
}

/// Writes records in the same text format `load_ticks` reads. Paths ending
/// in `.gz` are gzip-compressed.
pub fn write_ticks(path: &Path, spec: &InstrumentSpec, ticks: &[TickRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out: Box<dyn Write> = if is_gz(path) {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    let decimals = price_decimals(spec.tick_size);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "start_ts_ms,end_ts_ms,price,bid_volume,ask_volume,bid_trades,ask_trades")?;
        for t in ticks {
            writeln!(
                out,
                "{},{},{:.*},{},{},{},{}",
                t.start_ts_ms,
                t.end_ts_ms,
                decimals,
                t.price_idx as f64 * spec.tick_size,
                t.bid_volume,
                t.ask_volume,
                t.bid_trades,
                t.ask_trades
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
