use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::effect::{mean, sample_sd};
use super::{bonferroni, hedges_g_av, wilcoxon_one_sided, Alternative, BootstrapCi, EffectSizeResult};
use super::{MetricsRecord, PairedSample, WilcoxonResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResearchQuestion {
    /// Model precision against the always-positive baseline.
    Rq1,
    /// VCRB PR-AUC against price-level PR-AUC.
    Rq2,
    /// Liquid against less liquid instrument PR-AUC.
    Rq3,
    /// Footrule distance between interaction rankings against a bootstrap null.
    Rq4,
}

impl ResearchQuestion {
    /// Smaller footrule distances mean stronger agreement, so RQ4 tests the
    /// opposite direction.
    pub fn alternative(self) -> Alternative {
        match self {
            ResearchQuestion::Rq4 => Alternative::Less,
            _ => Alternative::Greater,
        }
    }

    pub fn measure(self) -> &'static str {
        match self {
            ResearchQuestion::Rq1 => "precision",
            ResearchQuestion::Rq2 | ResearchQuestion::Rq3 => "pr_auc",
            ResearchQuestion::Rq4 => "footrule",
        }
    }
}

impl std::fmt::Display for ResearchQuestion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ResearchQuestion::Rq1 => "RQ1",
            ResearchQuestion::Rq2 => "RQ2",
            ResearchQuestion::Rq3 => "RQ3",
            ResearchQuestion::Rq4 => "RQ4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Precision,
    NullPrecision,
    PrAuc,
    RocAuc,
    F1,
}

impl Measure {
    fn of(self, m: &MetricsRecord) -> Option<f64> {
        match self {
            Measure::Precision => Some(m.precision),
            Measure::NullPrecision => Some(m.null_precision),
            Measure::PrAuc => m.pr_auc,
            Measure::RocAuc => m.roc_auc,
            Measure::F1 => Some(m.f1),
        }
    }
}

/// Pairs two metric series by batch label. Batches must match one to one.
pub fn paired_from_metrics(
    treatment: &[MetricsRecord],
    treatment_measure: Measure,
    control: &[MetricsRecord],
    control_measure: Measure,
) -> Result<PairedSample> {
    if treatment.len() != control.len() {
        return Err(Error::LengthMismatch {
            left: treatment.len(),
            right: control.len(),
        });
    }
    let mut labels = Vec::new();
    let (mut t, mut c) = (Vec::new(), Vec::new());
    for (a, b) in treatment.iter().zip(control) {
        if a.batch != b.batch {
            return Err(Error::InvalidInput(format!(
                "mismatched batch labels '{}' and '{}'",
                a.batch, b.batch
            )));
        }
        let (Some(x), Some(y)) = (treatment_measure.of(a), control_measure.of(b)) else {
            log::warn!("batch {} lacks a defined measure; pair dropped", a.batch);
            continue;
        };
        labels.push(a.batch.clone());
        t.push(x);
        c.push(y);
    }
    PairedSample::new(labels, t, c)
}

/// One configuration within an RQ family, e.g. instrument "ES", range 7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub question: ResearchQuestion,
    pub configuration: String,
    pub sample: PairedSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub alpha: f64,
    pub bootstrap: BootstrapCi,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            alpha: 0.05,
            bootstrap: BootstrapCi::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
}

impl GroupSummary {
    fn of(xs: &[f64]) -> Self {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let mid = s.len() / 2;
        let median = if s.len() % 2 == 0 {
            (s[mid - 1] + s[mid]) / 2.0
        } else {
            s[mid]
        };
        let variance = if s.len() > 1 { sample_sd(&s).powi(2) } else { 0.0 };
        GroupSummary {
            mean: mean(&s),
            median,
            variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub question: ResearchQuestion,
    pub configuration: String,
    pub family_size: usize,
    pub corrected_alpha: f64,
    pub treatment: GroupSummary,
    pub control: GroupSummary,
    /// `None` when both groups have zero spread.
    pub effect: Option<EffectSizeResult>,
    /// Interval widened to `1 - alpha / m`.
    pub effect_adjusted: Option<EffectSizeResult>,
    /// `None` when every paired difference is zero.
    pub wilcoxon: Option<WilcoxonResult>,
    pub reject: bool,
}

impl ComparisonReport {
    pub fn verdict(&self) -> &'static str {
        if self.reject {
            "reject"
        } else {
            "retain"
        }
    }
}

/// Effect sizes and corrected one-sided tests for every comparison, with
/// Bonferroni applied within each RQ family. Output is sorted by question,
/// then input order.
pub fn rq_harness(comparisons: &[Comparison], cfg: &HarnessConfig) -> Result<Vec<ComparisonReport>> {
    let mut family: BTreeMap<ResearchQuestion, usize> = BTreeMap::new();
    for c in comparisons {
        *family.entry(c.question).or_default() += 1;
    }
    let mut out = Vec::with_capacity(comparisons.len());
    for (&question, &m) in &family {
        let corrected = bonferroni(cfg.alpha, m)?;
        for c in comparisons.iter().filter(|c| c.question == question) {
            let s = &c.sample;
            if s.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "{question} {}: at least 2 pairs required",
                    c.configuration
                )));
            }
            let effect = degenerate_to_none(hedges_g_av(s, &cfg.bootstrap))?;
            let adjusted_ci = BootstrapCi {
                confidence: 1.0 - corrected,
                ..cfg.bootstrap
            };
            let effect_adjusted = degenerate_to_none(hedges_g_av(s, &adjusted_ci))?;
            let wilcoxon = degenerate_to_none(wilcoxon_one_sided(s, question.alternative()))?;
            let reject = wilcoxon.is_some_and(|w| w.p_value < corrected);
            out.push(ComparisonReport {
                question,
                configuration: c.configuration.clone(),
                family_size: m,
                corrected_alpha: corrected,
                treatment: GroupSummary::of(&s.treatment),
                control: GroupSummary::of(&s.control),
                effect,
                effect_adjusted,
                wilcoxon,
                reject,
            });
        }
    }
    Ok(out)
}

fn degenerate_to_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(msg)) => {
            log::warn!("{msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| crate::features::MISSING_TOKEN.to_string(), |x| format!("{x:.6}"))
}

/// Tab-separated report, one row per comparison.
pub fn render_report(reports: &[ComparisonReport]) -> String {
    let mut s = String::from(
        "question\tconfiguration\tmeasure\tm\talpha\ttreatment_mean\ttreatment_median\ttreatment_var\t\
         control_mean\tcontrol_median\tcontrol_var\tg_av\tci_low\tci_high\tci_adj_low\tci_adj_high\t\
         statistic\tp_value\tn\tverdict\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.question,
            r.configuration,
            r.question.measure(),
            r.family_size,
            r.corrected_alpha,
            r.treatment.mean,
            r.treatment.median,
            r.treatment.variance,
            r.control.mean,
            r.control.median,
            r.control.variance,
            opt(r.effect.map(|e| e.g_av)),
            opt(r.effect.map(|e| e.ci_low)),
            opt(r.effect.map(|e| e.ci_high)),
            opt(r.effect_adjusted.map(|e| e.ci_low)),
            opt(r.effect_adjusted.map(|e| e.ci_high)),
            opt(r.wilcoxon.map(|w| w.statistic)),
            r.wilcoxon.map_or_else(|| "NA".to_string(), |w| format!("{:.6e}", w.p_value)),
            r.wilcoxon.map_or(0, |w| w.n_effective),
            r.verdict(),
        );
    }
    s
}
