mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_vcrb, random_stream, tick};
use vcrb_lab::patterns::{extract_vcrb, PatternKind, Side};

#[test]
fn matches_window_rescan_on_random_streams() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0;
    for _ in 0..50 {
        let n = rand::Rng::gen_range(&mut rng, 50..=1000);
        let ticks = random_stream(&mut rng, n);
        for range in [5, 7, 9, 11] {
            let got: Vec<_> = extract_vcrb(&ticks, range)
                .iter()
                .map(|e| (e.first_tick_index, e.formation_tick_index, e.target_price_idx))
                .collect();
            let want = brute_force_vcrb(&ticks, range);
            assert_eq!(got, want, "range {range}, {n} ticks");
            total += got.len();
        }
    }
    assert!(total > 100, "fixtures too quiet: {total} events");
}

#[test]
fn events_carry_their_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ticks = random_stream(&mut rng, 1000);
    for e in extract_vcrb(&ticks, 7) {
        assert_eq!(e.kind, PatternKind::Vcrb);
        assert_eq!(e.profile.levels.len(), 7);
        let now = ticks[e.formation_tick_index].price_idx;
        let side = if e.target_price_idx < now { Side::TargetBelow } else { Side::TargetAbove };
        assert_eq!(e.side, side);
        assert_ne!(now, e.target_price_idx);
    }
}

#[test]
fn gap_through_the_span_drops_the_buffer() {
    // 100 heavy, then a 10-level jump: every buffer overshoots range 5.
    let ticks = vec![tick(100, 9, 9), tick(101, 1, 1), tick(110, 1, 1)];
    assert!(extract_vcrb(&ticks, 5).is_empty());
    assert!(brute_force_vcrb(&ticks, 5).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profiles_conserve_volume(seed in any::<u64>(), n in 20usize..400, range in prop::sample::select(vec![3u32, 5, 7, 9, 11])) {
        let ticks = random_stream(&mut ChaCha8Rng::seed_from_u64(seed), n);
        for e in extract_vcrb(&ticks, range) {
            let w = &ticks[e.first_tick_index..=e.formation_tick_index];
            let bid: u64 = w.iter().map(|t| t.bid_volume).sum();
            let ask: u64 = w.iter().map(|t| t.ask_volume).sum();
            let n_ticks = w.len() as u64;
            prop_assert_eq!(e.profile.levels.iter().map(|l| l.bid_volume).sum::<u64>(), bid);
            prop_assert_eq!(e.profile.levels.iter().map(|l| l.ask_volume).sum::<u64>(), ask);
            prop_assert_eq!(e.profile.levels.iter().map(|l| l.ticks).sum::<u64>(), n_ticks);
            prop_assert_eq!(e.profile.total_volume(), bid + ask);
        }
    }

    #[test]
    fn centre_holds_the_unique_peak(seed in any::<u64>(), range in prop::sample::select(vec![5u32, 7, 9, 11])) {
        let ticks = random_stream(&mut ChaCha8Rng::seed_from_u64(seed), 300);
        for e in extract_vcrb(&ticks, range) {
            let peak = e.profile.at(e.target_price_idx).total_volume();
            let others = e.profile.levels.iter().filter(|l| l.total_volume() >= peak).count();
            prop_assert_eq!(others, 1);
            prop_assert_eq!(e.target_price_idx, e.profile.base_price_idx + i64::from(range / 2));
        }
    }
}
