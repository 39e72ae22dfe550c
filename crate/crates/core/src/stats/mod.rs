//! Classification metrics and the paired-comparison protocol.

mod effect;
mod metrics;
mod rq;
mod wilcoxon;

pub use effect::{hedges_correction, hedges_g_av, BootstrapCi, EffectSizeResult};
pub use metrics::{
    average_precision, average_ranks, classification_metrics, precision_at, roc_auc, MetricsRecord,
};
pub use rq::{
    paired_from_metrics, render_report, rq_harness, Comparison, ComparisonReport, GroupSummary, HarnessConfig, Measure,
    ResearchQuestion,
};
pub use wilcoxon::{bonferroni, wilcoxon_naive_p, wilcoxon_one_sided, Alternative, WilcoxonResult, EXACT_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two aligned measurements per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub labels: Vec<String>,
    pub treatment: Vec<f64>,
    pub control: Vec<f64>,
}

impl PairedSample {
    pub fn new(labels: Vec<String>, treatment: Vec<f64>, control: Vec<f64>) -> Result<Self> {
        if treatment.len() != control.len() {
            return Err(Error::LengthMismatch {
                left: treatment.len(),
                right: control.len(),
            });
        }
        if labels.len() != treatment.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: treatment.len(),
            });
        }
        if treatment.iter().chain(&control).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("paired sample contains non-finite values".into()));
        }
        Ok(PairedSample {
            labels,
            treatment,
            control,
        })
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }
}
