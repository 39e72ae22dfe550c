use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{sigmoid, GbdtModel, Node, Tree};
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub iterations: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_regularization: f64,
    /// Keep chronological order and skip row sampling.
    pub has_time: bool,
    /// Row fraction drawn per iteration when `has_time` is false.
    pub subsample: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            iterations: 100,
            max_depth: 3,
            learning_rate: 0.1,
            l2_regularization: 3.0,
            has_time: false,
            subsample: 0.8,
            min_child_weight: 1e-3,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_regularization >= 0.0 && self.l2_regularization.is_finite()) {
            return bad("l2_regularization must be >= 0");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn score(self, lambda: f64) -> f64 {
        self.g * self.g / (self.h + lambda)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

/// Column-major copy with per-feature ascending row order.
struct Columns {
    values: Vec<Vec<Option<f64>>>,
    sorted: Vec<Vec<usize>>,
    missing: Vec<Vec<usize>>,
}

impl Columns {
    fn new(data: &Dataset, row_order: &[usize]) -> Self {
        let nf = data.n_features();
        let mut values = vec![Vec::with_capacity(data.n_rows()); nf];
        for r in data.rows() {
            for (j, v) in r.iter().enumerate() {
                values[j].push(*v);
            }
        }
        let mut sorted = Vec::with_capacity(nf);
        let mut missing = Vec::with_capacity(nf);
        for col in &values {
            let mut present: Vec<usize> = row_order.iter().copied().filter(|&i| col[i].is_some()).collect();
            present.sort_by(|&a, &b| col[a].unwrap().total_cmp(&col[b].unwrap()));
            sorted.push(present);
            missing.push(row_order.iter().copied().filter(|&i| col[i].is_none()).collect());
        }
        Columns {
            values,
            sorted,
            missing,
        }
    }

    fn goes_left(&self, row: usize, c: &Candidate) -> bool {
        match self.values[c.feature][row] {
            Some(v) => v < c.threshold,
            None => c.missing_left,
        }
    }
}

struct Builder<'a> {
    cols: &'a Columns,
    params: &'a GbdtParams,
}

impl Builder<'_> {
    fn leaf_value(&self, s: Stats) -> f64 {
        -s.g / (s.h + self.params.l2_regularization)
    }

    fn gain(&self, l: Stats, r: Stats, total: Stats) -> Option<f64> {
        let p = self.params;
        if l.n == 0 || r.n == 0 || l.h < p.min_child_weight || r.h < p.min_child_weight {
            return None;
        }
        let lam = p.l2_regularization;
        Some(0.5 * (l.score(lam) + r.score(lam) - total.score(lam)))
    }

    /// Best split for each active slot, scanning every feature once.
    fn best_splits(&self, slot_of: &[Option<usize>], totals: &[Stats], g: &[f64], h: &[f64]) -> Vec<Option<Candidate>> {
        let n_slots = totals.len();
        let mut best: Vec<Option<Candidate>> = vec![None; n_slots];
        let consider = |slot: usize, cand: Candidate, best: &mut Vec<Option<Candidate>>| {
            if cand.gain > 0.0 && best[slot].map_or(true, |b| cand.gain > b.gain) {
                best[slot] = Some(cand);
            }
        };
        for f in 0..self.cols.values.len() {
            let col = &self.cols.values[f];
            let mut miss = vec![Stats::default(); n_slots];
            for &r in &self.cols.missing[f] {
                if let Some(s) = slot_of[r] {
                    miss[s].add(g[r], h[r]);
                }
            }
            let mut left = vec![Stats::default(); n_slots];
            let mut last: Vec<Option<f64>> = vec![None; n_slots];
            let eval = |s: usize, lv: f64, v: f64, left: Stats, best: &mut Vec<Option<Candidate>>| {
                let mut threshold = lv + (v - lv) / 2.0;
                if threshold <= lv {
                    threshold = v;
                }
                for missing_left in [false, true] {
                    let l = if missing_left { left.plus(miss[s]) } else { left };
                    let r = totals[s].minus(l);
                    if let Some(gain) = self.gain(l, r, totals[s]) {
                        consider(s, Candidate { gain, feature: f, threshold, missing_left }, best);
                    }
                    if miss[s].n == 0 {
                        break;
                    }
                }
            };
            for &r in &self.cols.sorted[f] {
                let Some(s) = slot_of[r] else { continue };
                let v = col[r].expect("sorted rows are present");
                if let Some(lv) = last[s] {
                    if v > lv {
                        eval(s, lv, v, left[s], &mut best);
                    }
                }
                left[s].add(g[r], h[r]);
                last[s] = Some(v);
            }
            // All present values on one side, missing rows on the other.
            for s in 0..n_slots {
                if miss[s].n > 0 && left[s].n > 0 {
                    if let Some(gain) = self.gain(left[s], miss[s], totals[s]) {
                        let cand = Candidate {
                            gain,
                            feature: f,
                            threshold: f64::MAX,
                            missing_left: false,
                        };
                        consider(s, cand, &mut best);
                    }
                }
            }
        }
        best
    }

    /// Grows one tree level by level over the rows in `sample`.
    fn build(&self, sample: &[usize], g: &[f64], h: &[f64], n_rows: usize) -> Tree {
        let mut slot_of: Vec<Option<usize>> = vec![None; n_rows];
        let mut root = Stats::default();
        for &r in sample {
            slot_of[r] = Some(0);
            root.add(g[r], h[r]);
        }
        let mut nodes: Vec<Node> = vec![Node::Leaf {
            value: self.leaf_value(root),
            cover: root.h,
            count: 0,
        }];
        // Tree node index and statistics of each open slot.
        let mut open: Vec<(usize, Stats)> = vec![(0, root)];
        for _ in 0..self.params.max_depth {
            if open.is_empty() {
                break;
            }
            let totals: Vec<Stats> = open.iter().map(|o| o.1).collect();
            let best = self.best_splits(&slot_of, &totals, g, h);
            let mut next: Vec<(usize, Stats)> = Vec::new();
            let mut remap: Vec<Option<(usize, usize)>> = vec![None; open.len()];
            for (s, cand) in best.iter().enumerate() {
                let Some(c) = cand else { continue };
                let (node, stats) = open[s];
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: 0.0, cover: 0.0, count: 0 });
                nodes.push(Node::Leaf { value: 0.0, cover: 0.0, count: 0 });
                nodes[node] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    missing_left: c.missing_left,
                    left: li,
                    right: ri,
                    gain: c.gain,
                    cover: stats.h,
                    count: 0,
                };
                remap[s] = Some((next.len(), next.len() + 1));
                next.push((li, Stats::default()));
                next.push((ri, Stats::default()));
            }
            for &r in sample {
                let Some(s) = slot_of[r] else { continue };
                slot_of[r] = match (remap[s], best[s]) {
                    (Some((l, rr)), Some(c)) => {
                        let t = if self.cols.goes_left(r, &c) { l } else { rr };
                        next[t].1.add(g[r], h[r]);
                        Some(t)
                    }
                    _ => None,
                };
            }
            for &(node, stats) in &next {
                nodes[node] = Node::Leaf {
                    value: self.leaf_value(stats),
                    cover: stats.h,
                    count: 0,
                };
            }
            open = next;
        }
        Tree { nodes }
    }
}

/// Sets every node count to the number of `data` rows passing through it.
fn fill_counts(tree: &mut Tree, cols: &Columns, n_rows: usize) {
    let mut counts = vec![0usize; tree.nodes.len()];
    for r in 0..n_rows {
        let mut i = 0;
        loop {
            counts[i] += 1;
            match &tree.nodes[i] {
                Node::Leaf { .. } => break,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match cols.values[*feature][r] {
                        Some(v) => v < *threshold,
                        None => *missing_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }
    for (n, c) in tree.nodes.iter_mut().zip(counts) {
        match n {
            Node::Split { count, .. } | Node::Leaf { count, .. } => *count = c,
        }
    }
}

/// Gradient boosting on logistic loss with Newton leaf values
/// `-G / (H + l2)` and exact greedy splits.
pub fn train(data: &Dataset, params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    if data.n_features() == 0 {
        return Err(Error::Training("empty feature set".into()));
    }
    if data.n_rows() < 2 || !data.has_both_classes() {
        return Err(Error::Training("training data needs both classes".into()));
    }
    let n = data.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    if !params.has_time {
        order.shuffle(&mut rng);
    }
    let cols = Columns::new(data, &order);
    let builder = Builder { cols: &cols, params };

    let prevalence = data.prevalence();
    let base_score = (prevalence / (1.0 - prevalence)).ln();
    let y: Vec<f64> = data.labels().iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut margin = vec![base_score; n];
    let (mut g, mut h) = (vec![0.0; n], vec![0.0; n]);
    let bag = if params.has_time {
        n
    } else {
        ((params.subsample * n as f64).round() as usize).clamp(2.min(n), n)
    };
    let mut trees = Vec::with_capacity(params.iterations);
    let mut pool = order.clone();
    for _ in 0..params.iterations {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            g[i] = p - y[i];
            h[i] = (p * (1.0 - p)).max(1e-16);
        }
        let sample: &[usize] = if bag < n {
            let (chosen, _) = pool.partial_shuffle(&mut rng, bag);
            chosen
        } else {
            &order
        };
        let mut tree = builder.build(sample, &g, &h, n);
        for (row_margin, row) in margin.iter_mut().zip(data.rows()) {
            *row_margin += params.learning_rate * tree.leaf_value(row);
        }
        fill_counts(&mut tree, &cols, n);
        trees.push(tree);
    }
    GbdtModel::new(data.feature_names().to_vec(), n, base_score, params.learning_rate, trees)
}
