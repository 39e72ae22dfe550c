//! Gradient-boosted decision trees for binary classification.
//!
//! Plain depth-limited binary trees grown by exact greedy search on the
//! second-order logistic loss. Each split stores its gain and the number of
//! training rows reaching it; the serialized model (see [`GbdtModel`]) is the
//! input of the interaction analysis.

mod dataset;
mod model;
mod selection;
mod train;

pub use dataset::Dataset;
pub use model::{sigmoid, GbdtModel, Node, Tree, MODEL_FORMAT, MODEL_VERSION};
pub use selection::{
    cv_precision, rfecv, time_series_folds, tune, walk_forward, BatchViews, Fold, RfecvResult, RfecvStep,
    TuneResult, TuningSpec, WalkForwardConfig, WalkForwardRecord,
};
pub use train::{train, GbdtParams};
