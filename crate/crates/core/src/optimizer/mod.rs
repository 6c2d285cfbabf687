//! Exhaustive policy search and the experiment sweeps built on it.

mod grid;
mod search;
mod sweeps;
mod uncertainty;

use serde::{Deserialize, Serialize};

use crate::cost::Evaluation;
use crate::error::Result;
use crate::model::PolicyPlan;

pub use grid::{day_range, level_range, GridSpec};
pub use search::{grid_search, grid_search_many, SearchProblem};
pub use sweeps::{
    adjustment_sweep, lockdown_feature_sweep, max_r3_below, r0_sensitivity, tradeoff_sweep,
    AdjustmentRow, LockdownFeature, TradeoffPoint,
};
pub use uncertainty::{mc_r0_uncertainty, truncated_normal, UncertaintyReport, UncertaintySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_plan: PolicyPlan,
    pub best_eval: Evaluation,
    /// Candidates that passed the static filters (simulated or cut short by
    /// the ICU check).
    pub n_evaluated: u64,
    pub n_feasible: u64,
    /// Candidates removed without simulation: `T_min`, the `R2 − R1` gap,
    /// or durations overrunning the horizon.
    pub n_pruned: u64,
}

/// One point of a sweep; failures are kept in place so that the output
/// stays aligned with the inputs.
#[derive(Debug)]
pub struct SweepRow<I, T> {
    pub input: I,
    pub outcome: Result<T>,
}
