//! Volume-centred range bar research toolkit.
//!
//! The pipeline runs tick ingestion ([`market_data`]), pattern extraction
//! ([`patterns`]), outcome labelling ([`labeling`]), feature computation
//! ([`features`]), gradient-boosted classification ([`gbdt`]), interaction
//! analysis ([`explain`]), strategy simulation ([`backtest`]) and the paired
//! statistical protocol ([`stats`]). [`pipeline`] wires the stages together
//! behind the `vcrb-lab` command line tool.

pub mod backtest;
pub mod error;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod labeling;
pub mod market_data;
pub mod patterns;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
