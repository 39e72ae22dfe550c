mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{counted_prf, pairwise_auc, swept_average_precision};
use vcrb_lab::stats::{classification_metrics, MetricsRecord};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Every fixture size up to 20, with coarse scores so ties are common.
fn fixtures() -> Vec<(Vec<bool>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    for n in 1..=20 {
        for _ in 0..50 {
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            let probs: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..=10u8)) / 10.0).collect();
            out.push((labels, probs));
        }
    }
    out
}

fn check(m: &MetricsRecord, labels: &[bool], probs: &[f64]) {
    let (p, r, f) = counted_prf(labels, probs, 0.5);
    assert!(close(m.precision, p) && close(m.recall, r) && close(m.f1, f), "{labels:?} {probs:?}");
    match (m.pr_auc, swept_average_precision(labels, probs)) {
        (Some(a), Some(b)) => assert!(close(a, b), "pr_auc {a} vs {b}"),
        (a, b) => assert_eq!(a, b),
    }
    match (m.roc_auc, pairwise_auc(labels, probs)) {
        (Some(a), Some(b)) => assert!(close(a, b), "roc_auc {a} vs {b}"),
        (a, b) => assert_eq!(a, b),
    }
    let pos = labels.iter().filter(|&&y| y).count();
    assert_eq!(m.null_precision, pos as f64 / labels.len() as f64);
    assert_eq!((m.n, m.positives), (labels.len(), pos));
}

#[test]
fn brute_force_agreement_on_small_fixtures() {
    for (labels, probs) in fixtures() {
        let m = classification_metrics("b", &labels, &probs, 0.5).unwrap();
        check(&m, &labels, &probs);
    }
}

#[test]
fn hand_fixture() {
    // scores 0.9 0.8 0.7 0.6 0.2, labels + - + - +
    let labels = [true, false, true, false, true];
    let probs = [0.9, 0.8, 0.7, 0.6, 0.2];
    let m = classification_metrics("b", &labels, &probs, 0.5).unwrap();
    assert_eq!(m.precision, 0.5);
    assert!(close(m.recall, 2.0 / 3.0));
    // AP = (1 + 2/3 + 3/5) / 3
    assert!(close(m.pr_auc.unwrap(), (1.0 + 2.0 / 3.0 + 0.6) / 3.0));
    // 3 of 6 positive-negative pairs ordered correctly
    assert!(close(m.roc_auc.unwrap(), 0.5));
    assert_eq!(m.null_precision, 0.6);
}

#[test]
fn always_positive_precision_is_prevalence() {
    let labels = [true, false, false, true, false, false, false];
    let m = classification_metrics("b", &labels, &[1.0; 7], 0.5).unwrap();
    assert_eq!(m.precision, m.null_precision);
    assert_eq!(m.null_precision, 2.0 / 7.0);
}

#[test]
fn one_class_has_no_auc() {
    let m = classification_metrics("b", &[false, false], &[0.1, 0.9], 0.5).unwrap();
    assert_eq!((m.pr_auc, m.roc_auc), (None, None));
    assert_eq!(m.precision, 0.0);
}

proptest! {
    #[test]
    fn bounded_and_invariant_under_monotone_rescoring(
        pairs in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..40)
    ) {
        let (labels, probs): (Vec<bool>, Vec<f64>) = pairs.into_iter().unzip();
        let m = classification_metrics("b", &labels, &probs, 0.5).unwrap();
        for v in [m.precision, m.recall, m.f1, m.null_precision] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let squashed: Vec<f64> = probs.iter().map(|p| p * p).collect();
        let m2 = classification_metrics("b", &labels, &squashed, 0.25).unwrap();
        prop_assert_eq!(m.roc_auc.map(|v| (v * 1e9).round()), m2.roc_auc.map(|v| (v * 1e9).round()));
        prop_assert_eq!(m.pr_auc.map(|v| (v * 1e9).round()), m2.pr_auc.map(|v| (v * 1e9).round()));
    }
}
