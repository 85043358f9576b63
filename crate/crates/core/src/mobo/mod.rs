//! Multi-objective Bayesian optimization over qualitative combinatorial
//! spaces: a vanilla baseline and the two-stage sensitivity-aware search.

mod acquisition;
mod archive;
mod engine;
mod focus;
mod trace;

pub use acquisition::{
    expected_improvement, mo_acquisition, simplex_weights, Prediction, Scalarizer, AUGMENTATION,
};
pub use archive::{dominates, pareto_filter, ArchiveEntry, Direction, ParetoArchive};
pub use engine::{
    keys_of, sensitivity_aware_bo, sensitivity_aware_bo_from, stage1, stage2, vanilla_bo, BoConfig,
    DEFAULT_STAGE1_ITERS,
};
pub use focus::{select_focus, FocusRule, FocusSelection};
pub use trace::{BoStatus, BoTrace, HistoryRow, Stage, TraceRecord};

use crate::error::Result;
use crate::space::MixedPoint;

/// A deterministic vector-valued black box.
pub trait Objectives: Sync {
    fn n_objectives(&self) -> usize;
    fn evaluate(&self, point: &MixedPoint) -> Result<Vec<f64>>;
}
