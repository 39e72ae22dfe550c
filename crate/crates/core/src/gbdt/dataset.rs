use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    labels: Vec<bool>,
    /// Rows are in time order.
    pub chronological: bool,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<bool>,
        chronological: bool,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature name '{name}'")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values for {} features",
                    row.len(),
                    feature_names.len()
                )));
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
            }
        }
        Ok(Dataset {
            feature_names,
            rows,
            labels,
            chronological,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn prevalence(&self) -> f64 {
        self.positives() as f64 / self.n_rows().max(1) as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.n_rows()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.feature_index(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
            .collect::<Result<_>>()?;
        Ok(Dataset {
            feature_names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
            labels: self.labels.clone(),
            chronological: self.chronological,
        })
    }

    pub fn slice(&self, range: Range<usize>) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: self.rows[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
            chronological: self.chronological,
        }
    }

    /// Rows at `indices`, in that order.
    pub fn take(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            chronological: self.chronological,
        }
    }

    /// Same features with replaced labels.
    pub fn with_labels(&self, labels: Vec<bool>) -> Result<Dataset> {
        Dataset::new(self.feature_names.clone(), self.rows.clone(), labels, self.chronological)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Dataset::new(names.clone(), vec![vec![Some(1.0), None]], vec![true], true).is_ok());
        assert!(Dataset::new(names.clone(), vec![vec![Some(1.0)]], vec![true], true).is_err());
        assert!(Dataset::new(names.clone(), vec![vec![Some(1.0), None]], vec![], true).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(Dataset::new(dup, vec![], vec![], true).is_err());
    }

    #[test]
    fn select_reorders_columns() {
        let names = vec!["a".to_string(), "b".to_string()];
        let d = Dataset::new(names, vec![vec![Some(1.0), Some(2.0)]], vec![true], true).unwrap();
        let s = d.select(&["b".to_string()]).unwrap();
        assert_eq!(s.rows()[0], vec![Some(2.0)]);
        assert!(d.select(&["zz".to_string()]).is_err());
    }
}
