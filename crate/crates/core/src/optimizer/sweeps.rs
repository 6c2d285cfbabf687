use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{evaluate_trajectory, CostParams, Evaluation, KeCalibration};
use crate::error::{Error, Result};
use crate::model::{simulate_policy, DriftModel, EpidemicParams, IntegratorConfig, Phase, PolicyPlan, Trajectory};

use super::{grid_search, grid_search_many, SearchProblem, SearchResult, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub gdp_loss: f64,
    pub infected_total: f64,
    pub plan: PolicyPlan,
    pub evaluation: Evaluation,
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Usage("empty list of alpha values".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {a}")));
    }
    Ok(())
}

/// Optimal GDP loss and infected count for each trade-off weight.
pub fn tradeoff_sweep(
    alphas: &[f64],
    problem: &SearchProblem<'_>,
    cost: &CostParams,
) -> Result<Vec<SweepRow<f64, TradeoffPoint>>> {
    check_alphas(alphas)?;
    let costs: Vec<CostParams> = alphas.iter().map(|&alpha| CostParams { alpha, ..*cost }).collect();
    let results = grid_search_many(problem, &costs)?;
    Ok(alphas
        .iter()
        .zip(results)
        .map(|(&alpha, outcome)| SweepRow {
            input: alpha,
            outcome: outcome.map(|r| TradeoffPoint {
                alpha,
                gdp_loss: r.best_eval.economic_cost,
                infected_total: r.best_eval.infected_total,
                plan: r.best_plan,
                evaluation: r.best_eval,
            }),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockdownFeature {
    pub alpha: f64,
    pub mu1: f64,
    pub mu2: f64,
}

/// Optimum for every `(α, μ1, μ2)` combination, α varying fastest.
pub fn lockdown_feature_sweep(
    alphas: &[f64],
    mu_pairs: &[(f64, f64)],
    problem: &SearchProblem<'_>,
    cost: &CostParams,
) -> Result<Vec<SweepRow<LockdownFeature, SearchResult>>> {
    check_alphas(alphas)?;
    if mu_pairs.is_empty() {
        return Err(Error::Usage("empty list of (mu1, mu2) pairs".into()));
    }
    let inputs: Vec<LockdownFeature> = mu_pairs
        .iter()
        .flat_map(|&(mu1, mu2)| alphas.iter().map(move |&alpha| LockdownFeature { alpha, mu1, mu2 }))
        .collect();
    let costs: Vec<CostParams> = inputs
        .iter()
        .map(|f| CostParams {
            alpha: f.alpha,
            mu1: f.mu1,
            mu2: f.mu2,
            ..*cost
        })
        .collect();
    let results = grid_search_many(problem, &costs)?;
    Ok(inputs
        .into_iter()
        .zip(results)
        .map(|(input, outcome)| SweepRow { input, outcome })
        .collect())
}

/// Re-optimizes for each natural reproduction number, recalibrating `K_e`
/// and dropping grid levels above the new `R0`.
pub fn r0_sensitivity(
    r0_values: &[f64],
    problem: &SearchProblem<'_>,
    cost: &CostParams,
    calibration: &KeCalibration,
) -> Result<Vec<SweepRow<f64, SearchResult>>> {
    if r0_values.is_empty() {
        return Err(Error::Usage("empty list of R0 values".into()));
    }
    Ok(r0_values
        .par_iter()
        .map(|&r0| SweepRow {
            input: r0,
            outcome: optimize_at_r0(r0, problem, cost, calibration),
        })
        .collect())
}

pub(crate) fn optimize_at_r0(
    r0: f64,
    problem: &SearchProblem<'_>,
    cost: &CostParams,
    calibration: &KeCalibration,
) -> Result<SearchResult> {
    let params = EpidemicParams {
        r0,
        ..*problem.params
    };
    params.validate()?;
    let ke = calibration.ke(&params)?;
    let grid = problem.grid.capped_at(r0)?;
    let shifted = SearchProblem {
        grid: &grid,
        params: &params,
        ..*problem
    };
    grid_search(&shifted, &CostParams { ke, ..*cost })
}

/// Largest `R3` keeping the drifted `R(t)` strictly below `limit` over an
/// adjustment phase of `days` days, or `None` if no non-negative level does.
pub fn max_r3_below(limit: f64, days: u32, params: &EpidemicParams, drift: &DriftModel) -> Option<f64> {
    // R(start + L) = R3 + (R0 − R3)·a3·L is the maximum over the phase
    let x = drift.a3 * days as f64;
    if x >= 1.0 {
        return None;
    }
    let bound = (limit - params.r0 * x) / (1.0 - x);
    (bound > 0.0).then_some(bound)
}

#[derive(Debug, Clone)]
pub struct AdjustmentRow {
    pub r3: f64,
    pub peak_icu: f64,
    pub peak_day: u32,
    /// Largest `R(t)` over the adjustment phase (`NaN` if the phase is empty).
    pub max_r_eff_adjustment: f64,
    /// Whether `σ·N·i(t)` stays within capacity at every daily sample.
    pub icu_ok: bool,
    pub evaluation: Evaluation,
    pub trajectory: Trajectory,
}

/// Replays a fixed four-phase prefix with each adjustment level `R3`.
pub fn adjustment_sweep(
    prefix: &PolicyPlan,
    r3_values: &[f64],
    params: &EpidemicParams,
    drift: &DriftModel,
    cost: &CostParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<AdjustmentRow>> {
    if r3_values.is_empty() {
        return Err(Error::Usage("empty list of R3 values".into()));
    }
    cost.validate()?;
    r3_values
        .par_iter()
        .map(|&r3| {
            let plan = PolicyPlan { r3, ..*prefix };
            let trajectory = simulate_policy(params, &plan, drift, cfg)?;
            let evaluation = evaluate_trajectory(&trajectory, &plan, params, cost);
            let icu = trajectory.icu_load(cost.sigma_icu);
            let (peak_day, peak_icu) = trajectory
                .days
                .iter()
                .zip(&icu)
                .fold((0, f64::NEG_INFINITY), |best, (&d, &x)| if x > best.1 { (d, x) } else { best });
            let max_r_eff_adjustment = trajectory
                .phase
                .iter()
                .zip(&trajectory.r_eff)
                .filter(|(p, _)| **p == Phase::Adjustment)
                .map(|(_, r)| *r)
                .fold(f64::NAN, f64::max);
            Ok(AdjustmentRow {
                r3,
                peak_icu,
                peak_day,
                max_r_eff_adjustment,
                icu_ok: peak_icu <= cost.icu_capacity,
                evaluation,
                trajectory,
            })
        })
        .collect()
}
