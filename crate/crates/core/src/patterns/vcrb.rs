use super::{PatternEvent, PatternKind, Side, VolumeProfile};
use crate::market_data::TickRecord;

#[derive(Debug, Clone, Copy)]
struct TickBuffer {
    init_price_idx: i64,
    first_tick_index: usize,
    min_price_idx: i64,
    max_price_idx: i64,
}

impl TickBuffer {
    fn span(&self) -> i64 {
        self.max_price_idx - self.min_price_idx
    }
}

/// Runs the per-price buffer automaton over `ticks` and returns the
/// volume-centred range bars for a range of `range_levels` price levels.
///
/// A buffer is opened at every price that has no open buffer; each tick is
/// appended to every open buffer. A buffer completes when its span reaches
/// `range_levels - 1`. Completed buffers whose profile has a unique volume
/// maximum at the centre level become events; buffers that overshoot the
/// span through a price gap are dropped.
///
/// # Panics
/// If `range_levels` is even or below 3.
pub fn extract_vcrb(ticks: &[TickRecord], range_levels: u32) -> Vec<PatternEvent> {
    assert!(
        range_levels >= 3 && range_levels % 2 == 1,
        "range_levels must be odd and >= 3, got {range_levels}"
    );
    let target_span = i64::from(range_levels) - 1;
    let mut open: Vec<TickBuffer> = Vec::new();
    let mut events = Vec::new();

    for (i, tick) in ticks.iter().enumerate() {
        let p = tick.price_idx;
        if !open.iter().any(|b| b.init_price_idx == p) {
            open.push(TickBuffer {
                init_price_idx: p,
                first_tick_index: i,
                min_price_idx: p,
                max_price_idx: p,
            });
        }
        for b in open.iter_mut() {
            b.min_price_idx = b.min_price_idx.min(p);
            b.max_price_idx = b.max_price_idx.max(p);
        }
        open.retain(|b| {
            if b.span() < target_span {
                return true;
            }
            if b.span() == target_span {
                let profile = VolumeProfile::from_ticks(&ticks[b.first_tick_index..=i]);
                if let Some(poc) = profile.centred_poc() {
                    events.push(PatternEvent::new(
                        PatternKind::Vcrb,
                        poc,
                        b.first_tick_index,
                        i,
                        Side::of(poc, p),
                        profile,
                    ));
                }
            }
            false
        });
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(price: i64, vol: u64) -> TickRecord {
        TickRecord {
            start_ts_ms: 0,
            end_ts_ms: 0,
            price_idx: price,
            bid_volume: vol,
            ask_volume: vol,
            bid_trades: u64::from(vol > 0),
            ask_trades: u64::from(vol > 0),
        }
    }

    fn stream(prices: &[(i64, u64)]) -> Vec<TickRecord> {
        prices.iter().map(|&(p, v)| tick(p, v)).collect()
    }

    #[test]
    fn monotone_stream_has_no_events() {
        let ticks = stream(&(0..=10).map(|p| (p, 1)).collect::<Vec<_>>());
        for r in [3, 5, 7, 9, 11] {
            assert!(extract_vcrb(&ticks, r).is_empty(), "range {r}");
        }
    }

    #[test]
    fn nine_level_profile_centred() {
        // Heavy tick at 104, then an oscillation spanning 100..=108.
        let mut prices = vec![(104, 20)];
        for k in 1..=4 {
            prices.push((104 - k, 1));
            prices.push((104 + k, 1));
        }
        let events = extract_vcrb(&stream(&prices), 9);
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.target_price_idx, 104);
        assert_eq!(e.profile.levels.len(), 9);
        assert_eq!(e.first_tick_index, 0);
        assert_eq!(e.formation_tick_index, 8);
        assert_eq!(e.side, Side::TargetBelow);
    }

    #[test]
    fn hand_traced_five_level_fixture() {
        // Buffers are written init@open_tick.
        // t: 0    1    2    3    4    5    6    7
        // p: 10   11   9    12   8    10   14   6
        // v: 9    1    1    1    1    1    1    1
        // 10@0: span hits 4 at t4 (8..12), centre 10 holds the unique max -> event.
        // 11@1: 9..12 at t3 (span 3), t4 -> 8..12 span 4, centre 10 has 0 -> drop.
        // 9@2: 8..12 at t4, centre 10 has 0 -> drop.
        // 12@3: t4 -> 8..12, centre 10 empty -> drop.
        // 8@4: t5 span 2; t6 -> 8..14 span 6 overshoot -> drop.
        // 10@5: t6 -> 10..14 span 4, centre 12 empty -> drop.
        // 14@6: t7 -> 6..14 overshoot -> drop.
        // 6@7: open at end.
        let ticks = stream(&[(10, 9), (11, 1), (9, 1), (12, 1), (8, 1), (10, 1), (14, 1), (6, 1)]);
        let events = extract_vcrb(&ticks, 5);
        let got: Vec<_> = events
            .iter()
            .map(|e| (e.first_tick_index, e.formation_tick_index, e.target_price_idx))
            .collect();
        assert_eq!(got, vec![(0, 4, 10)]);
        assert_eq!(events[0].profile.total_volume(), 2 * (9 + 4));
    }

    #[test]
    fn tied_peak_is_rejected() {
        let ticks = stream(&[(10, 5), (11, 5), (9, 1), (12, 1), (8, 1)]);
        assert!(extract_vcrb(&ticks, 5).is_empty());
    }

    #[test]
    #[should_panic]
    fn even_range_panics() {
        extract_vcrb(&[], 6);
    }
}
