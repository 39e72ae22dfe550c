use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PairedSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub g_av: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Confidence level of the interval, e.g. 0.95.
    pub confidence: f64,
    pub n: usize,
}

impl EffectSizeResult {
    /// Significant when the interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapCi {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapCi {
    fn default() -> Self {
        BootstrapCi {
            resamples: 10_000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

/// Small-sample correction factor `J = 1 - 3 / (4 (n - 1) - 1)`.
pub fn hedges_correction(n: usize) -> f64 {
    1.0 - 3.0 / (4.0 * (n as f64 - 1.0) - 1.0)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

fn g_av_of(treatment: &[f64], control: &[f64], correction: f64) -> Option<f64> {
    let diff: Vec<f64> = treatment.iter().zip(control).map(|(t, c)| t - c).collect();
    let pooled = (sample_sd(treatment) + sample_sd(control)) / 2.0;
    if !(pooled > 0.0) {
        return None;
    }
    Some(mean(&diff) / pooled * correction)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Hedges' g_av for paired data with a seeded percentile-bootstrap interval
/// over the pairs.
pub fn hedges_g_av(sample: &PairedSample, ci: &BootstrapCi) -> Result<EffectSizeResult> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("g_av needs at least 3 pairs, got {n}")));
    }
    if !(ci.confidence > 0.0 && ci.confidence < 1.0) || ci.resamples == 0 {
        return Err(Error::InvalidConfig("bootstrap confidence must be in (0,1) with >= 1 resample".into()));
    }
    let j = hedges_correction(n);
    let g = g_av_of(&sample.treatment, &sample.control, j)
        .ok_or_else(|| Error::Degenerate("zero pooled standard deviation".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(ci.seed);
    let mut stats = Vec::with_capacity(ci.resamples);
    let (mut t, mut c) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..ci.resamples {
        for k in 0..n {
            let i = rng.gen_range(0..n);
            t[k] = sample.treatment[i];
            c[k] = sample.control[i];
        }
        if let Some(v) = g_av_of(&t, &c, j) {
            stats.push(v);
        }
    }
    let (mut lo, mut hi) = if stats.is_empty() {
        (g, g)
    } else {
        stats.sort_by(f64::total_cmp);
        let alpha = 1.0 - ci.confidence;
        (quantile(&stats, alpha / 2.0), quantile(&stats, 1.0 - alpha / 2.0))
    };
    // Percentile intervals of skewed statistics can miss the point estimate.
    lo = lo.min(g);
    hi = hi.max(g);
    Ok(EffectSizeResult {
        g_av: g,
        ci_low: lo,
        ci_high: hi,
        confidence: ci.confidence,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: &[f64], c: &[f64]) -> PairedSample {
        PairedSample::new((0..t.len()).map(|i| i.to_string()).collect(), t.to_vec(), c.to_vec()).unwrap()
    }

    fn quick() -> BootstrapCi {
        BootstrapCi {
            resamples: 2_000,
            ..Default::default()
        }
    }

    #[test]
    fn correction_factor_for_thirteen() {
        assert!((hedges_correction(13) - (1.0 - 3.0 / 47.0)).abs() < 1e-15);
        assert!((hedges_correction(13) - 0.93617).abs() < 1e-5);
    }

    #[test]
    fn identical_groups_have_zero_effect() {
        let x = [0.3, 0.5, 0.4, 0.6, 0.45];
        let r = hedges_g_av(&sample(&x, &x), &quick()).unwrap();
        assert_eq!(r.g_av, 0.0);
        assert!(r.ci_low <= 0.0 && r.ci_high >= 0.0);
        assert!(!r.significant());
    }

    #[test]
    fn zero_sd_is_degenerate() {
        let r = hedges_g_av(&sample(&[1.0; 5], &[0.0; 5]), &quick());
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn hand_computed_value() {
        let t = [0.6, 0.7, 0.65, 0.8];
        let c = [0.5, 0.55, 0.6, 0.62];
        // mean diff = 0.12; sd_t = 0.0853913..., sd_c = 0.0518812...
        let sd_t = (((0.6f64 - 0.6875).powi(2) + (0.7f64 - 0.6875).powi(2) + (0.65f64 - 0.6875).powi(2) + (0.8f64 - 0.6875).powi(2)) / 3.0).sqrt();
        let sd_c = (((0.5f64 - 0.5675).powi(2) + (0.55f64 - 0.5675).powi(2) + (0.6f64 - 0.5675).powi(2) + (0.62f64 - 0.5675).powi(2)) / 3.0).sqrt();
        let expected = 0.12 / ((sd_t + sd_c) / 2.0) * (1.0 - 3.0 / 11.0);
        let r = hedges_g_av(&sample(&t, &c), &quick()).unwrap();
        assert!((r.g_av - expected).abs() < 1e-12);
        assert!(r.ci_low <= r.g_av && r.g_av <= r.ci_high);
    }

    #[test]
    fn seeded_interval_is_reproducible() {
        let t = [0.6, 0.7, 0.65, 0.8, 0.7];
        let c = [0.5, 0.55, 0.6, 0.62, 0.66];
        let a = hedges_g_av(&sample(&t, &c), &quick()).unwrap();
        let b = hedges_g_av(&sample(&t, &c), &quick()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn sign_and_scale_properties(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4..15),
            scale in 0.5f64..20.0,
        ) {
            let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let c: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let cfg = BootstrapCi { resamples: 200, ..Default::default() };
            let Ok(r) = hedges_g_av(&sample(&t, &c), &cfg) else { return Ok(()) };
            let md = mean(&t) - mean(&c);
            prop_assert!(r.g_av == 0.0 || r.g_av.signum() == md.signum());
            let ts: Vec<f64> = t.iter().map(|x| x * scale).collect();
            let cs: Vec<f64> = c.iter().map(|x| x * scale).collect();
            let r2 = hedges_g_av(&sample(&ts, &cs), &cfg).unwrap();
            prop_assert!((r.g_av - r2.g_av).abs() <= 1e-9 * r.g_av.abs().max(1.0));
            prop_assert!(r.ci_low <= r.g_av && r.g_av <= r.ci_high);
        }
    }
}
