use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::gbdt::{Dataset, GbdtModel, Node};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `value < threshold`
    Less,
    /// `value >= threshold`
    GreaterEqual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub threshold: f64,
    pub direction: Direction,
    /// Missing values take this branch.
    pub missing: bool,
}

/// Root-to-leaf route through one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub tree: usize,
    pub conditions: Vec<Condition>,
    /// Leaf value scaled by the learning rate.
    pub contribution: f64,
    /// Fraction of training rows reaching the leaf.
    pub support: f64,
    pub feature_set: BTreeSet<usize>,
}

/// One path per leaf. Supports come from `rows` when given, else from the
/// row counts stored in the model.
pub fn extract_paths(model: &GbdtModel, rows: Option<&Dataset>) -> Result<Vec<DecisionPath>> {
    let activations: Option<(Vec<Vec<usize>>, usize)> = match rows {
        Some(data) => {
            let map = model.column_map(data)?;
            let mut counts: Vec<Vec<usize>> = model.trees.iter().map(|t| vec![0; t.nodes.len()]).collect();
            let mut buf = vec![None; map.len()];
            for r in data.rows() {
                for (b, &j) in buf.iter_mut().zip(&map) {
                    *b = r[j];
                }
                for (t, tree) in model.trees.iter().enumerate() {
                    counts[t][tree.leaf_index(&buf)] += 1;
                }
            }
            Some((counts, data.n_rows()))
        }
        None => None,
    };
    let mut out = Vec::new();
    for (t, tree) in model.trees.iter().enumerate() {
        let mut stack: Vec<(usize, Vec<Condition>)> = vec![(0, Vec::new())];
        while let Some((i, conds)) = stack.pop() {
            match &tree.nodes[i] {
                Node::Leaf { value, count, .. } => {
                    let support = match &activations {
                        Some((c, n)) => c[t][i] as f64 / (*n).max(1) as f64,
                        None => *count as f64 / model.n_train_rows.max(1) as f64,
                    };
                    let feature_set = conds.iter().map(|c| c.feature).collect();
                    out.push(DecisionPath {
                        tree: t,
                        conditions: conds,
                        contribution: value * model.learning_rate,
                        support,
                        feature_set,
                    });
                }
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let mut r = conds.clone();
                    r.push(Condition {
                        feature: *feature,
                        threshold: *threshold,
                        direction: Direction::GreaterEqual,
                        missing: !missing_left,
                    });
                    stack.push((*right, r));
                    let mut l = conds;
                    l.push(Condition {
                        feature: *feature,
                        threshold: *threshold,
                        direction: Direction::Less,
                        missing: *missing_left,
                    });
                    stack.push((*left, l));
                }
            }
        }
    }
    Ok(out)
}

fn accumulate<'a>(
    names: &[String],
    paths: impl Iterator<Item = &'a DecisionPath>,
) -> InteractionMatrix {
    let m = names.len();
    let mut sum = vec![vec![0.0; m]; m];
    let mut count = vec![vec![0usize; m]; m];
    for p in paths {
        let cw = p.contribution * p.support;
        let fs: Vec<usize> = p.feature_set.iter().copied().collect();
        if fs.len() == 1 {
            sum[fs[0]][fs[0]] += cw;
            count[fs[0]][fs[0]] += 1;
        }
        for (a, &i) in fs.iter().enumerate() {
            for &j in &fs[a + 1..] {
                sum[i][j] += cw;
                count[i][j] += 1;
            }
        }
    }
    let mut values = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            if count[i][j] > 0 {
                let v = sum[i][j] / count[i][j] as f64;
                values[i][j] = v;
                values[j][i] = v;
            }
        }
    }
    InteractionMatrix {
        feature_names: names.to_vec(),
        values,
    }
}

/// Pairwise interaction strengths from decision paths: each entry is the
/// mean of `c * w` over the paths whose feature set holds both features.
/// The diagonal averages the single-feature paths of that feature.
pub fn interaction_matrix(feature_names: &[String], paths: &[DecisionPath]) -> InteractionMatrix {
    accumulate(feature_names, paths.iter())
}

/// [`interaction_matrix`] over paths with exactly `k` distinct features.
pub fn order_k_interactions(feature_names: &[String], paths: &[DecisionPath], k: usize) -> InteractionMatrix {
    assert!(k >= 1, "interaction order starts at 1");
    accumulate(feature_names, paths.iter().filter(|p| p.feature_set.len() == k))
}
