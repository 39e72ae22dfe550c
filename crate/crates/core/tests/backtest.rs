use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::distributions::Distribution;
use statrs::distribution::Normal;

use vcrb_lab::backtest::{profitability_threshold, rolling_sharpe, simulate, Signal, StrategyConfig};
use vcrb_lab::market_data::{InstrumentSpec, TickRecord};
use vcrb_lab::patterns::Side;

#[test]
fn thresholds() {
    let plain = profitability_threshold(&StrategyConfig::default()).unwrap();
    assert_eq!((plain * 1e4).round() / 1e4, 0.2414);
    let spread = StrategyConfig {
        spread_ticks: 1.0,
        ..Default::default()
    };
    let with_spread = profitability_threshold(&spread).unwrap();
    assert_eq!((with_spread * 1e4).round() / 1e4, 0.3333);
}

#[test]
fn rolling_sharpe_matches_direct_windows() {
    let law = Normal::new(0.001, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let returns: Vec<f64> = (0..400).map(|_| law.sample(&mut rng)).collect();
    let s = rolling_sharpe(&returns, 0.05, 252);
    assert!(s[..252].iter().all(Option::is_none));
    for d in 252..400 {
        let w = &returns[d - 252..d];
        let m = w.iter().sum::<f64>() / 252.0;
        let sd = (w.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / 251.0).sqrt();
        let want = (m - 0.05 / 252.0) / sd * 252f64.sqrt();
        assert!((s[d].unwrap() - want).abs() < 1e-9, "day {d}");
    }
}

#[test]
fn flat_returns_are_gaps() {
    let s = rolling_sharpe(&[0.002; 300], 0.05, 252);
    assert!(s.iter().all(Option::is_none));
}

fn ticks_from(prices: &[i64]) -> Vec<TickRecord> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &p)| TickRecord {
            start_ts_ms: i as i64 * 3_600_000,
            end_ts_ms: i as i64 * 3_600_000,
            price_idx: p,
            bid_volume: 1,
            ask_volume: 1,
            bid_trades: 1,
            ask_trades: 1,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equity_conserves_trade_pnl(
        steps in prop::collection::vec(-2i64..=2, 50..600),
        picks in prop::collection::vec((0usize..600, any::<bool>(), 0.0f64..1.0), 0..40),
        fee_quarters in 0u8..8,
    ) {
        let mut p = 1000;
        let prices: Vec<i64> = steps.iter().map(|s| { p += s; p }).collect();
        let ticks = ticks_from(&prices);
        let n = ticks.len();
        let signals: Vec<Signal> = picks
            .iter()
            .filter(|(i, _, _)| *i + 1 < n)
            .map(|&(i, above, prob)| Signal {
                target_price_idx: prices[i] + if above { 2 } else { -2 },
                side: if above { Side::TargetAbove } else { Side::TargetBelow },
                formation_tick_index: i,
                trigger_tick_index: i + 1,
                probability: prob,
            })
            .collect();
        // quarter-tick fees keep every sum exact
        let cfg = StrategyConfig { fee_ticks: f64::from(fee_quarters) / 4.0, ..Default::default() };
        let spec = InstrumentSpec::new("T", 0.25).unwrap();
        let r = simulate(&signals, &ticks, &spec, &cfg).unwrap();
        let total: f64 = r.trades.iter().map(|t| t.pnl_ticks).sum();
        let day_sum: f64 = r.equity.daily_returns.iter().map(|d| d * cfg.notional_ticks).sum();
        prop_assert_eq!(r.equity.final_pnl(), total);
        prop_assert!((day_sum - total).abs() <= 1e-9 * (1.0 + total.abs()));
        for w in r.trades.windows(2) {
            prop_assert!(w[0].exit_tick_index < w[1].entry_tick_index);
        }
    }
}
