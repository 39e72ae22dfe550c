use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::metrics::average_ranks;
use super::PairedSample;
use crate::error::{Error, Result};

/// Largest effective sample size evaluated by exact enumeration.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// Treatment values tend to exceed control values.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
    pub alternative: Alternative,
}

/// Non-zero differences and their average ranks by magnitude.
fn signed_ranks(sample: &PairedSample) -> Result<(Vec<f64>, Vec<f64>)> {
    let diffs: Vec<f64> = sample
        .treatment
        .iter()
        .zip(&sample.control)
        .map(|(t, c)| t - c)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    Ok((diffs, average_ranks(&mags)))
}

/// Counts of each achievable doubled rank sum over all 2^n sign assignments.
fn doubled_sum_counts(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub fn wilcoxon_one_sided(sample: &PairedSample, alternative: Alternative) -> Result<WilcoxonResult> {
    let (diffs, ranks) = signed_ranks(sample)?;
    let n = diffs.len();
    let w: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let (p, exact) = if n <= EXACT_LIMIT {
        // Average ranks are multiples of 1/2, so doubling makes them integral.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let w2 = (w * 2.0).round() as usize;
        let counts = doubled_sum_counts(&doubled);
        let tail: f64 = match alternative {
            Alternative::Greater => counts[w2..].iter().sum(),
            Alternative::Less => counts[..=w2].iter().sum(),
        };
        (tail / 2f64.powi(n as i32), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut ties = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
            let t = j as f64;
            ties += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let sd = var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let p = match alternative {
            Alternative::Greater => 1.0 - normal.cdf((w - mean - 0.5) / sd),
            Alternative::Less => normal.cdf((w - mean + 0.5) / sd),
        };
        (p, false)
    };
    Ok(WilcoxonResult {
        statistic: w,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        n_effective: n,
        exact,
        alternative,
    })
}

/// Direct enumeration of all sign assignments; exponential, for checking.
pub fn wilcoxon_naive_p(sample: &PairedSample, alternative: Alternative) -> Result<f64> {
    let (diffs, ranks) = signed_ranks(sample)?;
    let n = diffs.len();
    assert!(n <= 20, "naive enumeration limited to 20 differences");
    let w: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let hit = match alternative {
            Alternative::Greater => s >= w - 1e-9,
            Alternative::Less => s <= w + 1e-9,
        };
        hits += u64::from(hit);
    }
    Ok(hits as f64 / (1u64 << n) as f64)
}

pub fn bonferroni(alpha: f64, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidInput("Bonferroni correction needs m >= 1".into()));
    }
    Ok(alpha / m as f64)
}
