mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::enumerated_wilcoxon;
use vcrb_lab::stats::{bonferroni, wilcoxon_one_sided, Alternative, PairedSample};

fn sample(t: Vec<f64>, c: Vec<f64>) -> PairedSample {
    PairedSample::new((0..t.len()).map(|i| i.to_string()).collect(), t, c).unwrap()
}

#[test]
fn thirteen_positive_differences() {
    let s = sample((1..=13).map(|i| 0.5 + f64::from(i) / 100.0).collect(), vec![0.5; 13]);
    let r = wilcoxon_one_sided(&s, Alternative::Greater).unwrap();
    assert_eq!(r.statistic, 91.0);
    assert!(r.exact);
    assert_eq!(r.p_value, 1.0 / 8192.0);
    assert!((r.p_value - 1.2207e-4).abs() < 5e-9);
}

#[test]
fn exact_p_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..100 {
        let n = 2 + k % 9;
        // a coarse grid so ties and zero differences appear
        let t: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..8u8)) / 4.0).collect();
        let c: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..8u8)) / 4.0).collect();
        let s = sample(t.clone(), c.clone());
        for (alt, greater) in [(Alternative::Greater, true), (Alternative::Less, false)] {
            match wilcoxon_one_sided(&s, alt) {
                Ok(r) => {
                    let (w, p) = enumerated_wilcoxon(&t, &c, greater);
                    assert_eq!(r.statistic, w, "{t:?} {c:?}");
                    assert!((r.p_value - p).abs() < 1e-12, "{t:?} {c:?}: {} vs {p}", r.p_value);
                }
                Err(_) => assert!(t == c, "only all-zero differences may fail"),
            }
        }
    }
}

#[test]
fn large_samples_use_the_normal_approximation() {
    let t: Vec<f64> = (0..40).map(|i| f64::from(i % 7) - 2.0).collect();
    let s = sample(t, vec![0.0; 40]);
    let r = wilcoxon_one_sided(&s, Alternative::Greater).unwrap();
    assert!(!r.exact);
    assert!(r.p_value > 0.0 && r.p_value < 1.0);
}

#[test]
fn family_corrections() {
    assert_eq!(bonferroni(0.05, 8).unwrap(), 0.00625);
    assert_eq!(bonferroni(0.05, 4).unwrap(), 0.0125);
    assert!(bonferroni(0.05, 0).is_err());
}
