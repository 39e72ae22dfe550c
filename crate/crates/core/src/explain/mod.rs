//! Feature-interaction analysis of tree ensembles.
//!
//! Two interaction matrices are compared: one aggregated from decision paths
//! ([`interaction_matrix`]) and exact Shapley interaction values
//! ([`shapley_interactions`]). Agreement is measured by the footrule distance
//! between their strength rankings, against a bootstrap null.

mod paths;
mod shapley;

pub use paths::{extract_paths, interaction_matrix, order_k_interactions, Condition, DecisionPath, Direction};
pub use shapley::{shapley_interaction_rows, shapley_interactions, used_features, DEFAULT_MAX_FEATURES};

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric feature-by-feature matrix; the diagonal holds main effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub feature_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl InteractionMatrix {
    pub fn zeros(feature_names: Vec<String>) -> Self {
        let n = feature_names.len();
        InteractionMatrix {
            feature_names,
            values: vec![vec![0.0; n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Upper triangle including the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i][i..]);
        }
        out
    }

    pub fn from_upper_triangle(feature_names: Vec<String>, upper: &[f64]) -> Result<Self> {
        let n = feature_names.len();
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::LengthMismatch {
                left: upper.len(),
                right: n * (n + 1) / 2,
            });
        }
        let mut m = InteractionMatrix::zeros(feature_names);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m.values[i][j] = upper[k];
                m.values[j][i] = upper[k];
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| (self.values[i][j] - self.values[j][i]).abs() <= tol))
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("feature");
        for n in &self.feature_names {
            s.push('\t');
            s.push_str(n);
        }
        s.push('\n');
        for (name, row) in self.feature_names.iter().zip(&self.values) {
            s.push_str(name);
            for v in row {
                let _ = write!(s, "\t{v:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "<matrix>".into(),
            line,
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| parse_err(1, "empty matrix".into()))?;
        let names: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let mut fields = line.split('\t');
            let name = fields.next().unwrap_or_default();
            if names.get(k).map(String::as_str) != Some(name) {
                return Err(parse_err(k + 2, format!("unexpected row '{name}'")));
            }
            let row: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|e| parse_err(k + 2, e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != names.len() {
                return Err(parse_err(k + 2, format!("{} values for {} features", row.len(), names.len())));
            }
            values.push(row);
        }
        if values.len() != names.len() {
            return Err(parse_err(0, "matrix is not square".into()));
        }
        Ok(InteractionMatrix {
            feature_names: names,
            values,
        })
    }
}

/// `ranks[i]` is the 1-based position of element `i` in the ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVector(pub Vec<usize>);

/// Ranks the upper-triangle elements by descending absolute value; ties keep
/// (row, column) order.
pub fn rank_values(values: &[f64]) -> RankVector {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    RankVector(ranks)
}

pub fn rank_matrix(m: &InteractionMatrix) -> RankVector {
    rank_values(&m.upper_triangle())
}

/// Spearman footrule `Σ |a_i - b_i|`.
pub fn footrule(a: &RankVector, b: &RankVector) -> Result<u64> {
    if a.0.len() != b.0.len() {
        return Err(Error::LengthMismatch {
            left: a.0.len(),
            right: b.0.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).map(|(&x, &y)| x.abs_diff(y) as u64).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapNull {
    pub mean: f64,
    pub distances: Vec<u64>,
}

impl BootstrapNull {
    pub fn standard_error(&self) -> f64 {
        let n = self.distances.len() as f64;
        let var = self.distances.iter().map(|&d| (d as f64 - self.mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Footrule distances between independently resampled versions of the two
/// matrices. Each sample redraws the unique (upper-triangle) elements with
/// replacement, so the mirrored lower triangle follows.
pub fn bootstrap_null(a: &InteractionMatrix, b: &InteractionMatrix, n_boot: usize, seed: u64) -> Result<BootstrapNull> {
    let ua = a.upper_triangle();
    let ub = b.upper_triangle();
    if ua.len() != ub.len() {
        return Err(Error::LengthMismatch {
            left: ua.len(),
            right: ub.len(),
        });
    }
    if n_boot < 2 || ua.is_empty() {
        return Err(Error::InvalidInput("bootstrap needs >= 2 samples of a non-empty matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ua.len();
    let mut sa = vec![0.0; n];
    let mut sb = vec![0.0; n];
    let mut distances = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        for v in sa.iter_mut() {
            *v = ua[rng.gen_range(0..n)];
        }
        for v in sb.iter_mut() {
            *v = ub[rng.gen_range(0..n)];
        }
        distances.push(footrule(&rank_values(&sa), &rank_values(&sb))?);
    }
    let mean = distances.iter().sum::<u64>() as f64 / n_boot as f64;
    Ok(BootstrapNull { mean, distances })
}
