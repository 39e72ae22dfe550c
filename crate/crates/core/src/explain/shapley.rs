//! Exact Shapley interaction values with an interventional value function.
//!
//! `v(S)` is the mean margin over background rows `b` of the hybrid row that
//! takes features in `S` from the explained row `x` and the rest from `b`.
//! For one tree, one `b` and one leaf, the hybrid reaches the leaf exactly
//! when a set `A` of features is inside `S` and a disjoint set `B` is
//! outside it. Writing `1[A ⊆ S, B ∩ S = ∅]` as `Σ_{C ⊆ B} (-1)^|C| 1[A ∪ C ⊆ S]`
//! turns every term into subset indicators, so all `2^M` values come from one
//! subset-sum transform.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::InteractionMatrix;
use crate::error::{Error, Result};
use crate::gbdt::{Dataset, GbdtModel, Node};

pub const DEFAULT_MAX_FEATURES: usize = 15;

/// Features referenced by at least one split, ascending.
pub fn used_features(model: &GbdtModel) -> Vec<usize> {
    let mut used = vec![false; model.n_features()];
    for t in &model.trees {
        for n in &t.nodes {
            if let Node::Split { feature, .. } = n {
                used[*feature] = true;
            }
        }
    }
    (0..used.len()).filter(|&i| used[i]).collect()
}

fn goes_left(v: Option<f64>, threshold: f64, missing_left: bool) -> bool {
    match v {
        Some(v) => v < threshold,
        None => missing_left,
    }
}

/// Adds `weight` for every leaf reachable by some hybrid of `x` and `b`,
/// keyed by the (must-be-in, must-be-out) player masks.
#[allow(clippy::too_many_arguments)]
fn collect_terms(
    model: &GbdtModel,
    tree: usize,
    node: usize,
    x: &[Option<f64>],
    b: &[Option<f64>],
    player: &[Option<usize>],
    inside: u32,
    outside: u32,
    weight: f64,
    terms: &mut BTreeMap<(u32, u32), f64>,
) {
    match &model.trees[tree].nodes[node] {
        Node::Leaf { value, .. } => {
            *terms.entry((inside, outside)).or_default() += weight * value;
        }
        Node::Split {
            feature,
            threshold,
            missing_left,
            left,
            right,
            ..
        } => {
            let child = |go_left: bool| if go_left { *left } else { *right };
            let xl = goes_left(x[*feature], *threshold, *missing_left);
            let bl = goes_left(b[*feature], *threshold, *missing_left);
            if xl == bl {
                collect_terms(model, tree, child(xl), x, b, player, inside, outside, weight, terms);
                return;
            }
            let bit = 1u32 << player[*feature].expect("split features are players");
            if outside & bit == 0 {
                collect_terms(model, tree, child(xl), x, b, player, inside | bit, outside, weight, terms);
            }
            if inside & bit == 0 {
                collect_terms(model, tree, child(bl), x, b, player, inside, outside | bit, weight, terms);
            }
        }
    }
}

/// `v(S)` for every subset of the `m` players.
fn coalition_values(model: &GbdtModel, x: &[Option<f64>], background: &[Vec<Option<f64>>], player: &[Option<usize>], m: usize) -> Vec<f64> {
    // ordered so the summation order, and hence every bit of the result, is fixed
    let mut terms: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let w = model.learning_rate / background.len() as f64;
    for b in background {
        for t in 0..model.trees.len() {
            collect_terms(model, t, 0, x, b, player, 0, 0, w, &mut terms);
        }
    }
    let mut coef = vec![0.0; 1 << m];
    coef[0] += model.base_score;
    for ((inside, outside), v) in terms {
        // Every C ⊆ outside with sign (-1)^|C|.
        let mut c = outside;
        loop {
            let sign = if c.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            coef[(inside | c) as usize] += sign * v;
            if c == 0 {
                break;
            }
            c = (c - 1) & outside;
        }
    }
    for bit in 0..m {
        for s in 0..coef.len() {
            if s >> bit & 1 == 1 {
                coef[s] += coef[s ^ (1 << bit)];
            }
        }
    }
    coef
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Player-space interaction matrix from coalition values.
fn interaction_from_values(v: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut phi = vec![vec![0.0; m]; m];
    if m == 0 {
        return phi;
    }
    let fact = factorials(m);
    let full = (1usize << m) - 1;
    for i in 0..m {
        let bi = 1 << i;
        let mut attribution = 0.0;
        for s in 0..=full {
            if s & bi == 0 {
                let k = (s as u32).count_ones() as usize;
                attribution += fact[k] * fact[m - k - 1] / fact[m] * (v[s | bi] - v[s]);
            }
        }
        for j in i + 1..m {
            let bj = 1 << j;
            let mut total = 0.0;
            for s in 0..=full {
                if s & (bi | bj) == 0 {
                    let k = (s as u32).count_ones() as usize;
                    let weight = fact[k] * fact[m - k - 2] / (2.0 * fact[m - 1]);
                    total += weight * (v[s | bi | bj] - v[s | bi] - v[s | bj] + v[s]);
                }
            }
            phi[i][j] = total;
            phi[j][i] = total;
        }
        phi[i][i] = attribution;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| phi[i][j]).sum();
        phi[i][i] -= off;
    }
    phi
}

fn aligned_rows(model: &GbdtModel, data: &Dataset) -> Result<Vec<Vec<Option<f64>>>> {
    let map = model.column_map(data)?;
    Ok(data.rows().iter().map(|r| map.iter().map(|&j| r[j]).collect()).collect())
}

/// Per-row interaction matrices over all model features. Entries of a row
/// sum to its margin minus the mean background margin.
pub fn shapley_interaction_rows(
    model: &GbdtModel,
    background: &Dataset,
    explain: &Dataset,
    max_features: usize,
) -> Result<Vec<InteractionMatrix>> {
    let used = used_features(model);
    if used.len() > max_features.min(30) {
        return Err(Error::TooManyFeatures {
            used: used.len(),
            limit: max_features.min(30),
        });
    }
    if background.n_rows() == 0 {
        return Err(Error::InvalidInput("empty background sample".into()));
    }
    let bg = aligned_rows(model, background)?;
    let rows = aligned_rows(model, explain)?;
    let mut player = vec![None; model.n_features()];
    for (p, &f) in used.iter().enumerate() {
        player[f] = Some(p);
    }
    let m = used.len();
    let n_all = model.n_features();
    Ok(rows
        .par_iter()
        .map(|x| {
            let v = coalition_values(model, x, &bg, &player, m);
            let phi = interaction_from_values(&v, m);
            let mut values = vec![vec![0.0; n_all]; n_all];
            for (a, &fa) in used.iter().enumerate() {
                for (b, &fb) in used.iter().enumerate() {
                    values[fa][fb] = phi[a][b];
                }
            }
            InteractionMatrix {
                feature_names: model.feature_names.clone(),
                values,
            }
        })
        .collect())
}

/// Global matrix: the element-wise mean of absolute per-row matrices.
pub fn shapley_interactions(
    model: &GbdtModel,
    background: &Dataset,
    explain: &Dataset,
    max_features: usize,
) -> Result<InteractionMatrix> {
    if explain.n_rows() == 0 {
        return Err(Error::InvalidInput("no rows to explain".into()));
    }
    let per_row = shapley_interaction_rows(model, background, explain, max_features)?;
    let n = model.n_features();
    let mut values = vec![vec![0.0; n]; n];
    for m in &per_row {
        for i in 0..n {
            for j in 0..n {
                values[i][j] += m.values[i][j].abs();
            }
        }
    }
    let k = per_row.len() as f64;
    values.iter_mut().flatten().for_each(|v| *v /= k);
    Ok(InteractionMatrix {
        feature_names: model.feature_names.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::Tree;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node {
        Node::Split {
            feature,
            threshold,
            missing_left: true,
            left,
            right,
            gain: 1.0,
            cover: 1.0,
            count: 1,
        }
    }

    fn leaf(value: f64) -> Node {
        Node::Leaf { value, cover: 1.0, count: 1 }
    }

    fn data(rows: Vec<Vec<f64>>, k: usize) -> Dataset {
        let n = rows.len();
        Dataset::new(
            names(k),
            rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
            vec![false; n],
            true,
        )
        .unwrap()
    }

    #[test]
    fn stump_has_no_interactions() {
        let model = GbdtModel::new(names(2), 1, 0.0, 1.0, vec![Tree { nodes: vec![split(0, 0.5, 1, 2), leaf(1.0), leaf(-1.0)] }]).unwrap();
        let bg = data(vec![vec![1.0, 0.0], vec![0.0, 0.0]], 2);
        let x = data(vec![vec![0.0, 3.0]], 2);
        let r = &shapley_interaction_rows(&model, &bg, &x, 15).unwrap()[0];
        assert_eq!(r.values[0][1], 0.0);
        assert_eq!(r.values[1][1], 0.0);
        // f(x) = 1, mean background margin = 0.
        assert!((r.values[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xor_tree_interacts() {
        let nodes = vec![
            split(0, 0.5, 1, 2),
            split(1, 0.5, 3, 4),
            split(1, 0.5, 5, 6),
            leaf(1.0),
            leaf(-1.0),
            leaf(-1.0),
            leaf(1.0),
        ];
        let model = GbdtModel::new(names(2), 1, 0.0, 1.0, vec![Tree { nodes }]).unwrap();
        let bg = data(vec![vec![1.0, 0.0]], 2);
        let x = data(vec![vec![0.0, 1.0]], 2);
        let r = &shapley_interaction_rows(&model, &bg, &x, 15).unwrap()[0];
        // v(∅) = f(1,0) = -1, v({0}) = f(0,0) = 1, v({1}) = f(1,1) = 1, v(all) = -1.
        // Φ01 = (1/2)(v01 - v0 - v1 + v∅) = (1/2)(-1 - 1 - 1 - 1) = -2.
        assert!((r.values[0][1] + 2.0).abs() < 1e-12);
        assert_eq!(r.values[0][1], r.values[1][0]);
        let total: f64 = r.values.iter().flatten().sum();
        assert!((total - 0.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_features() {
        let model = GbdtModel::new(
            names(3),
            1,
            0.0,
            1.0,
            vec![Tree { nodes: vec![split(0, 0.5, 1, 2), split(1, 0.5, 3, 4), split(2, 0.5, 5, 6), leaf(0.0), leaf(1.0), leaf(2.0), leaf(3.0)] }],
        )
        .unwrap();
        let bg = data(vec![vec![0.0; 3]], 3);
        assert!(matches!(
            shapley_interactions(&model, &bg, &bg, 2),
            Err(Error::TooManyFeatures { used: 3, limit: 2 })
        ));
    }
}
