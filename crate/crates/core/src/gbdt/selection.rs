use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Dataset, GbdtModel, GbdtParams};
use crate::error::{Error, Result};
use crate::stats::{classification_metrics, precision_at, MetricsRecord};

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Expanding-window splits: the rows are cut into `k + 1` chunks and fold
/// `i` trains on chunks `0..=i` and tests on chunk `i + 1`.
pub fn time_series_folds(n_rows: usize, k: usize) -> Result<Vec<Fold>> {
    if k == 0 {
        return Err(Error::InvalidConfig("at least one fold required".into()));
    }
    let test = n_rows / (k + 1);
    if test == 0 {
        return Err(Error::InvalidInput(format!("{n_rows} rows cannot form {k} folds")));
    }
    let first = n_rows - k * test;
    Ok((0..k)
        .map(|i| {
            let end = first + i * test;
            Fold {
                train: 0..end,
                test: end..end + test,
            }
        })
        .collect())
}

fn fold_precision(data: &Dataset, params: &GbdtParams, fold: &Fold) -> f64 {
    let tr = data.slice(fold.train.clone());
    let te = data.slice(fold.test.clone());
    if te.positives() == 0 {
        log::warn!("fold {:?} has no positive test rows; scored 0", fold.test);
        return 0.0;
    }
    if !tr.has_both_classes() {
        log::warn!("fold {:?} trains on a single class; scored 0", fold.train);
        return 0.0;
    }
    match train(&tr, params).and_then(|m| m.predict_proba(&te)) {
        Ok(p) => precision_at(te.labels(), &p, THRESHOLD),
        Err(e) => {
            log::warn!("fold training failed ({e}); scored 0");
            0.0
        }
    }
}

/// Mean precision over chronological folds.
pub fn cv_precision(data: &Dataset, params: &GbdtParams, folds: &[Fold]) -> f64 {
    let scores: Vec<f64> = folds.par_iter().map(|f| fold_precision(data, params, f)).collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvStep {
    pub features: Vec<String>,
    pub score: f64,
    /// Feature dropped after scoring this step.
    pub eliminated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    pub selected: Vec<String>,
    pub trace: Vec<RfecvStep>,
}

/// Recursive elimination with step 1: score the current subset by CV
/// precision, drop the least important feature of a model fitted on all
/// rows, repeat down to one feature. The best-scoring subset wins, ties
/// going to the smaller one.
pub fn rfecv(data: &Dataset, params: &GbdtParams, n_folds: usize) -> Result<RfecvResult> {
    let folds = time_series_folds(data.n_rows(), n_folds)?;
    let mut current: Vec<String> = data.feature_names().to_vec();
    let mut trace = Vec::new();
    loop {
        let sub = data.select(&current)?;
        let score = cv_precision(&sub, params, &folds);
        if current.len() == 1 {
            trace.push(RfecvStep {
                features: current.clone(),
                score,
                eliminated: None,
            });
            break;
        }
        let model = train(&sub, params)?;
        let imp = model.feature_importance();
        let mut worst = 0;
        for (i, (_, v)) in imp.iter().enumerate() {
            if *v <= imp[worst].1 {
                worst = i;
            }
        }
        let dropped = current.remove(worst);
        trace.push(RfecvStep {
            features: sub.feature_names().to_vec(),
            score,
            eliminated: Some(dropped),
        });
    }
    let mut best = 0;
    for (i, s) in trace.iter().enumerate() {
        if s.score >= trace[best].score {
            best = i;
        }
    }
    Ok(RfecvResult {
        selected: trace[best].features.clone(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSpec {
    pub iterations: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub has_time: Vec<bool>,
    pub l2_regularization: Vec<f64>,
    pub learning_rate: f64,
    pub subsample: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TuningSpec {
    fn default() -> Self {
        TuningSpec {
            iterations: vec![100, 300, 500],
            max_depth: vec![3, 5, 7],
            has_time: vec![true, false],
            l2_regularization: vec![1.0, 3.0, 10.0],
            learning_rate: 0.1,
            subsample: 0.8,
            folds: 3,
            seed: 0,
        }
    }
}

impl TuningSpec {
    pub fn validate(&self) -> Result<()> {
        if self.iterations.is_empty()
            || self.max_depth.is_empty()
            || self.has_time.is_empty()
            || self.l2_regularization.is_empty()
        {
            return Err(Error::InvalidConfig("tuning grids must be non-empty".into()));
        }
        if self.folds == 0 {
            return Err(Error::InvalidConfig("tuning needs at least one fold".into()));
        }
        for p in self.grid() {
            p.validate()?;
        }
        Ok(())
    }

    /// Grid points in iterations, depth, has_time, l2 order.
    pub fn grid(&self) -> Vec<GbdtParams> {
        let mut out = Vec::new();
        for &iterations in &self.iterations {
            for &max_depth in &self.max_depth {
                for &has_time in &self.has_time {
                    for &l2_regularization in &self.l2_regularization {
                        out.push(GbdtParams {
                            iterations,
                            max_depth,
                            learning_rate: self.learning_rate,
                            l2_regularization,
                            has_time,
                            subsample: self.subsample,
                            seed: self.seed,
                            ..Default::default()
                        });
                    }
                }
            }
        }
        out
    }

    /// Parameters used while eliminating features: the cheapest grid point.
    pub fn selection_params(&self) -> GbdtParams {
        GbdtParams {
            iterations: *self.iterations.iter().min().expect("validated grid"),
            max_depth: *self.max_depth.iter().min().expect("validated grid"),
            has_time: self.has_time[0],
            l2_regularization: self.l2_regularization[0],
            learning_rate: self.learning_rate,
            subsample: self.subsample,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: GbdtParams,
    pub best_score: f64,
    /// Every grid point with its mean CV precision, in grid order.
    pub table: Vec<(GbdtParams, f64)>,
    /// Best configuration refitted on all rows.
    pub model: GbdtModel,
}

/// Exhaustive grid search on mean CV precision; the first grid point wins
/// ties.
pub fn tune(data: &Dataset, spec: &TuningSpec) -> Result<TuneResult> {
    spec.validate()?;
    let folds = time_series_folds(data.n_rows(), spec.folds)?;
    let table: Vec<(GbdtParams, f64)> = spec
        .grid()
        .into_par_iter()
        .map(|p| {
            let s = cv_precision(data, &p, &folds);
            (p, s)
        })
        .collect();
    let mut best = 0;
    for (i, (_, s)) in table.iter().enumerate() {
        if *s > table[best].1 {
            best = i;
        }
    }
    let (params, score) = table[best];
    let model = train(data, &params)?;
    Ok(TuneResult {
        best: params,
        best_score: score,
        table,
        model,
    })
}

/// Training and test views of one batch.
#[derive(Debug, Clone)]
pub struct BatchViews {
    pub label: String,
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkForwardConfig {
    pub tuning: TuningSpec,
    pub feature_selection: bool,
}

impl Default for WalkForwardConfig {
    fn default() -> Self {
        WalkForwardConfig {
            tuning: TuningSpec::default(),
            feature_selection: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkForwardRecord {
    pub train_batch: String,
    pub test_batch: String,
    pub selected_features: Vec<String>,
    pub rfecv: Option<RfecvResult>,
    pub params: GbdtParams,
    pub cv_precision: f64,
    /// Scored on the test view of the next batch; `batch` is its label.
    pub metrics: MetricsRecord,
    pub probabilities: Vec<f64>,
    pub model: GbdtModel,
}

fn skip_reason(train: &Dataset, test: &Dataset, folds: usize) -> Option<String> {
    if train.n_rows() == 0 {
        return Some("training batch has no labelled events".into());
    }
    if !train.has_both_classes() {
        return Some("training batch has a single class".into());
    }
    if test.n_rows() == 0 {
        return Some("test batch has no labelled events".into());
    }
    if train.n_rows() < folds + 1 {
        return Some(format!("training batch has {} rows for {folds} folds", train.n_rows()));
    }
    None
}

/// Trains on batch N and evaluates on batch N + 1 for every consecutive
/// pair, selecting features then tuning within the training batch.
pub fn walk_forward(batches: &[BatchViews], cfg: &WalkForwardConfig) -> Result<Vec<WalkForwardRecord>> {
    if batches.len() < 2 {
        return Err(Error::InvalidInput("walk-forward needs at least 2 batches".into()));
    }
    cfg.tuning.validate()?;
    let mut out = Vec::new();
    for pair in batches.windows(2) {
        let (tr, te) = (&pair[0], &pair[1]);
        if let Some(reason) = skip_reason(&tr.train, &te.test, cfg.tuning.folds) {
            log::warn!("skipping {} -> {}: {reason}", tr.label, te.label);
            continue;
        }
        let (selected, rfe) = if cfg.feature_selection && tr.train.n_features() > 1 {
            let r = rfecv(&tr.train, &cfg.tuning.selection_params(), cfg.tuning.folds)?;
            (r.selected.clone(), Some(r))
        } else {
            (tr.train.feature_names().to_vec(), None)
        };
        let data = tr.train.select(&selected)?;
        let tuned = tune(&data, &cfg.tuning)?;
        let probs = tuned.model.predict_proba(&te.test)?;
        let metrics = classification_metrics(te.label.clone(), te.test.labels(), &probs, THRESHOLD)?;
        log::info!(
            "{} -> {}: precision {:.4} (baseline {:.4}), {} features",
            tr.label,
            te.label,
            metrics.precision,
            metrics.null_precision,
            selected.len()
        );
        out.push(WalkForwardRecord {
            train_batch: tr.label.clone(),
            test_batch: te.label.clone(),
            selected_features: selected,
            rfecv: rfe,
            params: tuned.best,
            cv_precision: tuned.best_score,
            metrics,
            probabilities: probs,
            model: tuned.model,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(seed: u64, n: usize, k: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| (0..k).map(|_| Some(rng.gen_range(0.0..1.0))).collect())
            .collect();
        let labels = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        Dataset::new((0..k).map(|i| format!("f{i}")).collect(), rows, labels, true).unwrap()
    }

    fn small_spec() -> TuningSpec {
        TuningSpec {
            iterations: vec![20],
            max_depth: vec![2],
            has_time: vec![true],
            l2_regularization: vec![1.0],
            ..Default::default()
        }
    }

    #[test]
    fn folds_expand_chronologically() {
        let f = time_series_folds(100, 3).unwrap();
        assert_eq!(f[0], Fold { train: 0..25, test: 25..50 });
        assert_eq!(f[2], Fold { train: 0..75, test: 75..100 });
        let f = time_series_folds(10, 3).unwrap();
        assert_eq!(f[0].train, 0..4);
        assert_eq!(f[2].test, 8..10);
        assert!(time_series_folds(3, 3).is_err());
    }

    #[test]
    fn rfecv_trace_and_single_feature() {
        let d = noisy(1, 120, 4);
        let r = rfecv(&d, &small_spec().selection_params(), 3).unwrap();
        assert_eq!(r.trace.len(), 4);
        assert_eq!(r.trace.iter().filter(|s| s.eliminated.is_some()).count() + 1, r.trace.len());
        let one = d.select(&["f2".to_string()]).unwrap();
        let r = rfecv(&one, &small_spec().selection_params(), 3).unwrap();
        assert_eq!(r.selected, vec!["f2".to_string()]);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn tune_table_covers_the_grid() {
        let d = noisy(2, 90, 2);
        let spec = TuningSpec {
            iterations: vec![5, 10],
            max_depth: vec![1, 2, 3],
            has_time: vec![true, false],
            l2_regularization: vec![1.0],
            ..Default::default()
        };
        let r = tune(&d, &spec).unwrap();
        assert_eq!(r.table.len(), 12);
        let single = tune(&d, &small_spec()).unwrap();
        assert_eq!(single.table.len(), 1);
        assert_eq!(single.best, small_spec().grid()[0]);
    }

    #[test]
    fn empty_grid_is_invalid() {
        let spec = TuningSpec {
            max_depth: vec![],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn walk_forward_emits_one_record_per_pair() {
        let batches: Vec<BatchViews> = (0..2)
            .map(|i| {
                let d = noisy(10 + i, 80, 3);
                BatchViews {
                    label: format!("b{i}"),
                    train: d.clone(),
                    test: d,
                }
            })
            .collect();
        let cfg = WalkForwardConfig {
            tuning: small_spec(),
            feature_selection: true,
        };
        let recs = walk_forward(&batches, &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].metrics.batch, "b1");
        assert!(walk_forward(&batches[..1], &cfg).is_err());
    }

    #[test]
    fn empty_batch_pair_is_skipped() {
        let full = noisy(3, 80, 2);
        let empty = full.slice(0..0);
        let batches = vec![
            BatchViews { label: "a".into(), train: empty.clone(), test: empty.clone() },
            BatchViews { label: "b".into(), train: full.clone(), test: full.clone() },
            BatchViews { label: "c".into(), train: full.clone(), test: full },
        ];
        let cfg = WalkForwardConfig { tuning: small_spec(), feature_selection: false };
        let recs = walk_forward(&batches, &cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].train_batch, "b");
    }
}
