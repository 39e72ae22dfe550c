use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Method;
use crate::backtest::StrategyConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FEATURE_NAMES};
use crate::gbdt::{GbdtParams, WalkForwardConfig};
use crate::labeling::LabelConfig;
use crate::market_data::{InstrumentSpec, SyntheticConfig};
use crate::patterns::PriceLevelConfig;
use crate::stats::HarnessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentConfig {
    pub symbol: String,
    pub tick_size: f64,
    #[serde(default)]
    pub session_calendar: Option<Vec<i64>>,
    /// Tick files read in order and concatenated.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    /// Sort out-of-order records with a warning instead of failing.
    #[serde(default)]
    pub sort_unordered: bool,
}

impl InstrumentConfig {
    pub fn spec(&self) -> InstrumentSpec {
        InstrumentSpec {
            symbol: self.symbol.clone(),
            tick_size: self.tick_size,
            session_calendar: self.session_calendar.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub enabled: bool,
    pub features: Vec<String>,
    pub params: GbdtParams,
    pub background_rows: usize,
    pub explain_rows: usize,
    pub max_features: usize,
    pub bootstrap_samples: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        let features = ["P0", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "MS0", "MS1", "MS2", "MS3"];
        ExplainConfig {
            enabled: true,
            features: features.iter().map(|s| s.to_string()).collect(),
            params: GbdtParams {
                iterations: 100,
                max_depth: 3,
                l2_regularization: 3.0,
                has_time: true,
                ..GbdtParams::default()
            },
            background_rows: 100,
            explain_rows: 100,
            max_features: 15,
            bootstrap_samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub strategy: StrategyConfig,
    pub risk_free_annual: f64,
    pub sharpe_window: usize,
    pub smooth_days: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            strategy: StrategyConfig::default(),
            risk_free_annual: 0.05,
            sharpe_window: 252,
            smooth_days: 90,
        }
    }
}

/// Everything a run depends on. Unknown keys are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_ranges")]
    pub ranges: Vec<u32>,
    #[serde(default = "default_true")]
    pub price_levels: bool,
    #[serde(default = "default_months")]
    pub months_per_batch: u32,
    pub instruments: Vec<InstrumentConfig>,
    #[serde(default)]
    pub labels: LabelConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default, rename = "price_level_detection")]
    pub level_detection: PriceLevelConfig,
    #[serde(default)]
    pub model: WalkForwardConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub stats: HarnessConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_ranges() -> Vec<u32> {
    vec![5, 7, 9, 11]
}

fn default_true() -> bool {
    true
}

fn default_months() -> u32 {
    3
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative tick paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for inst in &mut cfg.instruments {
            for p in &mut inst.paths {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.instruments.is_empty() {
            return bad("at least one instrument is required".into());
        }
        let mut symbols: Vec<&str> = self.instruments.iter().map(|i| i.symbol.as_str()).collect();
        symbols.sort_unstable();
        if symbols.windows(2).any(|w| w[0] == w[1]) {
            return bad("instrument symbols must be unique".into());
        }
        for inst in &self.instruments {
            if inst.symbol.is_empty() || !inst.symbol.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return bad(format!("symbol '{}' must be non-empty ASCII alphanumerics, '-' or '_'", inst.symbol));
            }
            inst.spec().validate()?;
            match (&inst.synthetic, inst.paths.is_empty()) {
                (Some(s), true) => s.validate()?,
                (None, false) => {}
                _ => return bad(format!("instrument {} needs exactly one of `paths` or `synthetic`", inst.symbol)),
            }
        }
        if self.ranges.is_empty() {
            return bad("at least one range is required".into());
        }
        for &r in &self.ranges {
            if r < 3 || r % 2 == 0 {
                return bad(format!("range {r} must be odd and >= 3"));
            }
        }
        let mut ranges = self.ranges.clone();
        ranges.sort_unstable();
        ranges.dedup();
        if ranges.len() != self.ranges.len() {
            return bad("ranges must be distinct".into());
        }
        if self.months_per_batch == 0 {
            return bad("months_per_batch must be positive".into());
        }
        self.labels.validate()?;
        self.features.validate()?;
        if self.level_detection.lookback_ticks == 0 || self.level_detection.rejection_ticks < 1 {
            return bad("price level lookback and rejection must be positive".into());
        }
        self.model.tuning.validate()?;
        if self.explain.enabled {
            let e = &self.explain;
            e.params.validate()?;
            if e.features.is_empty() {
                return bad("explain.features must not be empty".into());
            }
            if let Some(f) = e.features.iter().find(|f| !FEATURE_NAMES.contains(&f.as_str())) {
                return Err(Error::UnknownFeature(f.clone()));
            }
            if e.features.len() > e.max_features.min(30) {
                return bad(format!(
                    "explain.features has {} entries, above max_features {}",
                    e.features.len(),
                    e.max_features.min(30)
                ));
            }
            if e.background_rows == 0 || e.explain_rows == 0 || e.bootstrap_samples < 2 {
                return bad("explain row counts must be positive and bootstrap_samples >= 2".into());
            }
        }
        self.backtest.strategy.validate()?;
        if self.backtest.sharpe_window < 2 || self.backtest.smooth_days == 0 {
            return bad("sharpe_window must be >= 2 and smooth_days positive".into());
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return bad("stats.alpha must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.ranges.iter().map(|&r| Method::Vcrb(r)).collect();
        if self.price_levels {
            m.push(Method::Levels);
        }
        m
    }

    /// Canonical serialization; the manifest hashes this.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Seed for one consumer, derived from the root seed and a label.
    pub fn derive_seed(&self, parts: &[&str]) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}
