//! Independent reference implementations shared by the integration suites.
//! Everything here is written the slow, obvious way.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vcrb_lab::gbdt::{Dataset, GbdtModel, Node, Tree};
use vcrb_lab::market_data::TickRecord;

pub fn tick(price_idx: i64, bid: u64, ask: u64) -> TickRecord {
    TickRecord {
        start_ts_ms: 0,
        end_ts_ms: 0,
        price_idx,
        bid_volume: bid,
        ask_volume: ask,
        bid_trades: u64::from(bid > 0),
        ask_trades: u64::from(ask > 0),
    }
}

/// Bounded random walk with occasional jumps and small integer volumes, so
/// ties, gaps and revisits all happen.
pub fn random_stream(rng: &mut ChaCha8Rng, n: usize) -> Vec<TickRecord> {
    let mut p = 0i64;
    (0..n)
        .map(|_| {
            let r: f64 = rng.gen();
            p += if r < 0.05 {
                rng.gen_range(-6..=6)
            } else {
                rng.gen_range(-1..=1)
            };
            tick(p, rng.gen_range(0..4), rng.gen_range(0..4))
        })
        .map(|mut t| {
            if t.bid_volume + t.ask_volume == 0 {
                t.bid_volume = 1;
                t.bid_trades = 1;
            }
            t
        })
        .collect()
}

/// (first tick, formation tick, centre price) of every range bar, by window
/// re-scan. A bar may start at tick `s` only when no earlier bar started at
/// the same price is still collecting at `s`; it closes at the first tick
/// where the window's price span reaches `range - 1`.
pub fn brute_force_vcrb(ticks: &[TickRecord], range: u32) -> Vec<(usize, usize, i64)> {
    let target = i64::from(range) - 1;
    let close_of = |s: usize| -> Option<usize> {
        (s..ticks.len()).find(|&e| {
            let w = &ticks[s..=e];
            let hi = w.iter().map(|t| t.price_idx).max().unwrap();
            let lo = w.iter().map(|t| t.price_idx).min().unwrap();
            hi - lo >= target
        })
    };
    let mut started: Vec<(i64, usize, Option<usize>)> = Vec::new();
    for s in 0..ticks.len() {
        let p = ticks[s].price_idx;
        let busy = started
            .iter()
            .any(|&(q, a, e)| q == p && a < s && e.map_or(true, |e| s <= e));
        if !busy {
            started.push((p, s, close_of(s)));
        }
    }
    let mut out = Vec::new();
    for &(_, s, e) in &started {
        let Some(e) = e else { continue };
        let w = &ticks[s..=e];
        let hi = w.iter().map(|t| t.price_idx).max().unwrap();
        let lo = w.iter().map(|t| t.price_idx).min().unwrap();
        if hi - lo != target {
            continue;
        }
        let mut vol: BTreeMap<i64, u64> = BTreeMap::new();
        for t in w {
            *vol.entry(t.price_idx).or_default() += t.bid_volume + t.ask_volume;
        }
        let centre = (hi + lo) / 2;
        let peak = vol.get(&centre).copied().unwrap_or(0);
        if vol.iter().all(|(&p, &v)| p == centre || v < peak) {
            out.push((s, e, centre));
        }
    }
    out.sort_by_key(|&(s, e, _)| (e, s));
    out
}

/// Precision, recall and F1 by direct counting.
pub fn counted_prf(labels: &[bool], probs: &[f64], threshold: f64) -> (f64, f64, f64) {
    let called: Vec<bool> = probs.iter().map(|&p| p >= threshold).collect();
    let tp = labels.iter().zip(&called).filter(|(&y, &c)| y && c).count() as f64;
    let n_called = called.iter().filter(|&&c| c).count() as f64;
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let p = if n_called == 0.0 { 0.0 } else { tp / n_called };
    let r = if n_pos == 0.0 { 0.0 } else { tp / n_pos };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Average precision from a sweep over every distinct score used as the
/// threshold, highest first.
pub fn swept_average_precision(labels: &[bool], probs: &[f64]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = probs.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let (p, r, _) = counted_prf(labels, probs, t);
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    Some(ap)
}

/// ROC-AUC as the fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half.
pub fn pairwise_auc(labels: &[bool], probs: &[f64]) -> Option<f64> {
    let (mut good, mut pairs) = (0.0, 0usize);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                pairs += 1;
                if probs[i] > probs[j] {
                    good += 1.0;
                } else if probs[i] == probs[j] {
                    good += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| good / pairs as f64)
}

/// One-sided signed-rank p-value by listing all 2^n sign patterns. Ranks
/// come from pairwise comparisons of the absolute differences.
pub fn enumerated_wilcoxon(treatment: &[f64], control: &[f64], greater: bool) -> (f64, f64) {
    let d: Vec<f64> = treatment
        .iter()
        .zip(control)
        .map(|(t, c)| t - c)
        .filter(|d| *d != 0.0)
        .collect();
    let n = d.len();
    let rank = |i: usize| -> f64 {
        let a = d[i].abs();
        let below = d.iter().filter(|x| x.abs() < a).count() as f64;
        let equal = d.iter().filter(|x| x.abs() == a).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = (0..n).map(rank).collect();
    let w: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (greater && s >= w - 1e-9) || (!greater && s <= w + 1e-9) {
            hits += 1;
        }
    }
    (w, hits as f64 / f64::from(1u32 << n))
}

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("f{i}")).collect()
}

pub fn split(feature: usize, threshold: f64, missing_left: bool, left: usize, right: usize, count: usize) -> Node {
    Node::Split {
        feature,
        threshold,
        missing_left,
        left,
        right,
        gain: 1.0,
        cover: count as f64,
        count,
    }
}

pub fn leaf(value: f64, count: usize) -> Node {
    Node::Leaf {
        value,
        cover: count as f64,
        count,
    }
}

fn random_subtree(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, depth: usize, m: usize) -> usize {
    let i = nodes.len();
    if depth == 0 || rng.gen_bool(0.25) {
        nodes.push(leaf(rng.gen_range(-1.0..1.0), 1));
        return i;
    }
    nodes.push(leaf(0.0, 0));
    let f = rng.gen_range(0..m);
    let thr = f64::from(rng.gen_range(-2i32..=2)) * 0.5;
    let miss = rng.gen_bool(0.5);
    let l = random_subtree(rng, nodes, depth - 1, m);
    let r = random_subtree(rng, nodes, depth - 1, m);
    nodes[i] = split(f, thr, miss, l, r, 1);
    i
}

/// Up to 3 trees of depth <= 3 over `m` features.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize) -> GbdtModel {
    let n_trees = rng.gen_range(1..=3);
    let trees = (0..n_trees)
        .map(|_| {
            let mut nodes = Vec::new();
            random_subtree(rng, &mut nodes, 3, m);
            Tree { nodes }
        })
        .collect();
    GbdtModel::new(names(m), 10, rng.gen_range(-0.5..0.5), rng.gen_range(0.1..1.0), trees).unwrap()
}

/// Rows on the threshold grid with some missing cells.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| (!rng.gen_bool(0.1)).then(|| f64::from(rng.gen_range(-3i32..=3)) * 0.5))
                .collect()
        })
        .collect();
    Dataset::new(names(m), rows, vec![false; n], false).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Interaction matrix of one row by listing every coalition of all `M`
/// model features. `v(S)` averages the margin of the hybrid rows that take
/// `S` from `x` and the rest from each background row.
pub fn enumerated_shapley(model: &GbdtModel, background: &[Vec<Option<f64>>], x: &[Option<f64>]) -> Vec<Vec<f64>> {
    let m = model.n_features();
    let v: Vec<f64> = (0..1usize << m)
        .map(|s| {
            background
                .iter()
                .map(|b| {
                    let h: Vec<Option<f64>> = (0..m).map(|k| if s >> k & 1 == 1 { x[k] } else { b[k] }).collect();
                    model.margin_row(&h)
                })
                .sum::<f64>()
                / background.len() as f64
        })
        .collect();
    let mut phi = vec![vec![0.0; m]; m];
    // pairwise index
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut acc = 0.0;
            for s in 0..1usize << m {
                if s >> i & 1 == 1 || s >> j & 1 == 1 {
                    continue;
                }
                let k = s.count_ones() as usize;
                let w = factorial(k) * factorial(m - k - 2) / (2.0 * factorial(m - 1));
                acc += w * (v[s | 1 << i | 1 << j] - v[s | 1 << i] - v[s | 1 << j] + v[s]);
            }
            phi[i][j] = acc;
        }
    }
    // main effects: Shapley value minus the off-diagonal row
    for i in 0..m {
        let mut sv = 0.0;
        for s in 0..1usize << m {
            if s >> i & 1 == 1 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = factorial(k) * factorial(m - k - 1) / factorial(m);
            sv += w * (v[s | 1 << i] - v[s]);
        }
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| phi[i][j]).sum();
        phi[i][i] = sv - off;
    }
    phi
}

/// Largest footrule distance between two permutations of 1..=n, by listing
/// every permutation against the identity.
pub fn max_footrule_enumerated(n: usize) -> u64 {
    fn go(n: usize, perm: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut u64) {
        if perm.len() == n {
            let d = perm.iter().enumerate().map(|(i, &r)| (i + 1).abs_diff(r) as u64).sum();
            *best = (*best).max(d);
            return;
        }
        for r in 1..=n {
            if !used[r] {
                used[r] = true;
                perm.push(r);
                go(n, perm, used, best);
                perm.pop();
                used[r] = false;
            }
        }
    }
    let mut best = 0;
    go(n, &mut Vec::new(), &mut vec![false; n + 1], &mut best);
    best
}

/// Outcome of each volume peak in a synthetic stream, read off the prices
/// alone: `(bid/ask ratio at the peak, reversed)`. The first return to the
/// peak price after the peak is the touch; a 15-tick move back to the
/// approach side is a reversal, a 3-tick move through is a crossing.
pub fn scan_peaks(ticks: &[TickRecord], peak_volume: u64) -> Vec<(f64, bool)> {
    let peaks: Vec<usize> = (0..ticks.len()).filter(|&i| ticks[i].total_volume() >= peak_volume).collect();
    let mut out = Vec::new();
    for (k, &pk) in peaks.iter().enumerate() {
        let end = peaks.get(k + 1).copied().unwrap_or(ticks.len());
        let x = ticks[pk].price_idx;
        let Some(touch) = (pk + 1..end).find(|&i| ticks[i].price_idx == x) else {
            continue;
        };
        let approach = (ticks[touch - 1].price_idx - x).signum();
        let outcome = ticks[touch + 1..end].iter().find_map(|t| {
            let d = (t.price_idx - x) * approach;
            if d >= 15 {
                Some(true)
            } else if d <= -3 {
                Some(false)
            } else {
                None
            }
        });
        if let Some(rev) = outcome {
            let t = &ticks[pk];
            out.push((t.bid_volume as f64 / t.ask_volume as f64, rev));
        }
    }
    out
}
