use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "vcrb-gbdt";
pub const MODEL_VERSION: u32 = 1;

/// Probabilities are kept strictly inside (0, 1).
const PROB_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `value < threshold` go left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        /// Loss reduction of the split.
        gain: f64,
        /// Hessian sum of the rows that trained the node.
        cover: f64,
        /// Training rows reaching the node.
        count: usize,
    },
    Leaf {
        value: f64,
        cover: f64,
        count: usize,
    },
}

impl Node {
    pub fn count(&self) -> usize {
        match self {
            Node::Split { count, .. } | Node::Leaf { count, .. } => *count,
        }
    }
}

/// Binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[Option<f64>]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match row[*feature] {
                        Some(v) => v < *threshold,
                        None => *missing_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_value(&self, row: &[Option<f64>]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidInput("tree without nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= n_features {
                        return Err(Error::InvalidInput(format!(
                            "node {i} references feature {feature} of {n_features}"
                        )));
                    }
                    if threshold.is_nan() {
                        return Err(Error::InvalidInput(format!("node {i} has a NaN threshold")));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(Error::InvalidInput(format!("node {i} has invalid child {c}")));
                        }
                        parents[c] += 1;
                    }
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::InvalidInput(format!("leaf {i} is not finite")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::InvalidInput("tree nodes do not form a single binary tree".into()));
        }
        Ok(())
    }
}

/// Additive logistic tree ensemble.
///
/// `P(y = 1 | x) = sigmoid(base_score + learning_rate * sum of leaf values)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtModel {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub n_train_rows: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

impl GbdtModel {
    pub fn new(
        feature_names: Vec<String>,
        n_train_rows: usize,
        base_score: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        let m = GbdtModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_names,
            n_train_rows,
            base_score,
            learning_rate,
            trees,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput("non-finite model scalars".into()));
        }
        for t in &self.trees {
            t.validate(self.feature_names.len())?;
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Log-odds for a row in model feature order.
    pub fn margin_row(&self, row: &[Option<f64>]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.leaf_value(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[Option<f64>]) -> f64 {
        sigmoid(self.margin_row(row))
    }

    /// Column positions of the model features within `data`.
    pub fn column_map(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|n| data.feature_index(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
            .collect()
    }

    pub fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>> {
        let map = self.column_map(data)?;
        let mut buf = vec![None; map.len()];
        Ok(data
            .rows()
            .iter()
            .map(|r| {
                for (b, &j) in buf.iter_mut().zip(&map) {
                    *b = r[j];
                }
                self.predict_row(&buf)
            })
            .collect())
    }

    /// Split gain summed per feature and normalized to sum to one; all zeros
    /// for a model without splits.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut gains = vec![0.0; self.n_features()];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    gains[*feature] += gain.max(0.0);
                }
            }
        }
        let total: f64 = gains.iter().sum();
        self.feature_names
            .iter()
            .zip(gains)
            .map(|(n, g)| (n.clone(), if total > 0.0 { g / total } else { 0.0 }))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: GbdtModel = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(threshold: f64, left: f64, right: f64, missing_left: bool) -> Tree {
        Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold,
                    missing_left,
                    left: 1,
                    right: 2,
                    gain: 2.0,
                    cover: 10.0,
                    count: 10,
                },
                Node::Leaf {
                    value: left,
                    cover: 5.0,
                    count: 5,
                },
                Node::Leaf {
                    value: right,
                    cover: 5.0,
                    count: 5,
                },
            ],
        }
    }

    #[test]
    fn zero_trees_predict_base_rate() {
        let m = GbdtModel::new(vec!["a".into()], 4, 0.7, 0.1, vec![]).unwrap();
        let p = m.predict_row(&[Some(3.0)]);
        assert!((p - 1.0 / (1.0 + (-0.7f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn stump_hand_evaluation_and_missing_direction() {
        let m = GbdtModel::new(vec!["a".into()], 10, -0.2, 0.5, vec![stump(1.5, 0.8, -0.4, false)]).unwrap();
        let left = 1.0 / (1.0 + (-(-0.2 + 0.5 * 0.8f64)).exp());
        let right = 1.0 / (1.0 + (-(-0.2 + 0.5 * -0.4f64)).exp());
        assert!((m.predict_row(&[Some(1.0)]) - left).abs() < 1e-15);
        assert!((m.predict_row(&[Some(1.5)]) - right).abs() < 1e-15);
        assert!((m.predict_row(&[None]) - right).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = GbdtModel::new(vec!["a".into()], 10, 0.0, 0.1, vec![stump(1.0, 0.1, -0.1, true)]).unwrap();
        let back = GbdtModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let bad = m.to_json().unwrap().replace("\"feature\": 0", "\"feature\": 3");
        assert!(GbdtModel::from_json(&bad).is_err());
    }

    #[test]
    fn importance_of_single_feature_model() {
        let m = GbdtModel::new(vec!["a".into(), "b".into()], 10, 0.0, 0.1, vec![stump(1.0, 0.1, -0.1, true)]).unwrap();
        let imp = m.feature_importance();
        assert_eq!(imp[0].1, 1.0);
        assert_eq!(imp[1].1, 0.0);
    }

    #[test]
    fn probabilities_stay_inside_unit_interval() {
        let m = GbdtModel::new(vec!["a".into()], 10, 0.0, 1.0, vec![stump(1.0, 900.0, -900.0, true)]).unwrap();
        let hi = m.predict_row(&[Some(0.0)]);
        let lo = m.predict_row(&[Some(2.0)]);
        assert!(hi < 1.0 && lo > 0.0);
    }
}
