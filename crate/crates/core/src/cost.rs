//! Scalarized economic/health objective and the feasibility constraints.
//!
//! For a plan `(τ0, τ1, τ2, R1, R2, R3)` over horizon `T` the objective is
//!
//! ```text
//! J = α·E + (1 − α)·K_h·[s(0) − s(T)]
//! E = K_e·δ²·[ (R0−R1)²·τ1 + (R0−R2)²·τ2/μ1² + (R0−R3)²·(T−τ0−τ1−τ2)/μ2² ]
//! ```
//!
//! `E` is closed form in the plan; only the health term needs a simulation.
//! `K_e` has units of currency·day since `u²` carries 1/day².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate_policy, DriftModel, EpidemicParams, IntegratorConfig, PolicyPlan, Trajectory};

/// Slack on the strict `R2 > R1 + r_gap` test so that decimal grid values
/// exactly `r_gap` apart are treated as equal rather than split by rounding.
pub const GAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Weight of the economic term, in `[0, 1]`.
    pub alpha: f64,
    /// Economic conversion factor (currency·day).
    pub ke: f64,
    /// Health conversion factor (persons).
    pub kh: f64,
    /// Post-lockdown relief factor.
    pub mu1: f64,
    /// Adjustment-phase relief factor.
    pub mu2: f64,
    /// Fraction of infected needing intensive care.
    pub sigma_icu: f64,
    /// ICU beds (persons).
    pub icu_capacity: f64,
    /// Minimum lockdown duration (days).
    pub t_min: u32,
    /// Minimum gap `R2 − R1`.
    pub r_gap: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ));
        }
        for (name, v) in [
            ("ke", self.ke),
            ("kh", self.kh),
            ("icu_capacity", self.icu_capacity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 1, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.sigma_icu) {
            return Err(Error::invalid(
                "sigma_icu",
                format!("must lie in [0, 1], got {}", self.sigma_icu),
            ));
        }
        if !(self.r_gap.is_finite()) {
            return Err(Error::invalid("r_gap", "must be finite"));
        }
        Ok(())
    }

    /// Largest admissible infected fraction, `N_max^ICU / (σ·N)`.
    pub fn max_infected_fraction(&self, population: f64) -> f64 {
        self.icu_capacity / (self.sigma_icu * population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Icu,
    TMin,
    RGap,
}

impl Constraint {
    pub fn tag(self) -> &'static str {
        match self {
            Constraint::Icu => "icu",
            Constraint::TMin => "t_min",
            Constraint::RGap => "r_gap",
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// GDP loss `E` (currency), before weighting by α.
    pub economic_cost: f64,
    /// `K_h·[s(0) − s(T)]`, before weighting by `1 − α`.
    pub health_cost: f64,
    pub total_cost: f64,
    /// Newly infected persons over the horizon, `N·[s(0) − s(T)]`.
    pub infected_total: f64,
    /// Peak ICU load on the daily grid (persons).
    pub peak_icu: f64,
    pub feasible: bool,
    pub violated_constraint: Option<Constraint>,
}

/// Closed-form GDP loss of a plan; independent of drift and dynamics.
pub fn economic_cost(plan: &PolicyPlan, params: &EpidemicParams, cost: &CostParams) -> f64 {
    economic_cost_with(plan, params, cost.ke, cost.mu1, cost.mu2)
}

pub(crate) fn economic_cost_with(
    plan: &PolicyPlan,
    params: &EpidemicParams,
    ke: f64,
    mu1: f64,
    mu2: f64,
) -> f64 {
    let r0 = params.r0;
    let sq = |r: f64| (r0 - r) * (r0 - r);
    let lockdown = sq(plan.r1) * plan.tau1 as f64;
    let post = sq(plan.r2) * plan.tau2 as f64 / (mu1 * mu1);
    let adjust = sq(plan.r3) * plan.adjustment_days() as f64 / (mu2 * mu2);
    ke * params.delta * params.delta * (lockdown + post + adjust)
}

/// Lockdown-only economic term `K_e·δ²·(R0−R1)²·τ1`.
pub fn lockdown_term(ke: f64, params: &EpidemicParams, r1: f64, tau1: f64) -> f64 {
    ke * params.delta * params.delta * (params.r0 - r1) * (params.r0 - r1) * tau1
}

/// `K_h·[s(0) − s(T)]`.
pub fn health_cost(traj: &Trajectory, cost: &CostParams) -> f64 {
    cost.kh * (traj.s_initial() - traj.s_final())
}

/// Picks `K_e` so that a lockdown of `tau1_ref` days at `r1_ref` costs
/// exactly `delta_gdp`.
pub fn calibrate_ke(delta_gdp: f64, params: &EpidemicParams, r1_ref: f64, tau1_ref: f64) -> Result<f64> {
    if !(r1_ref < params.r0) {
        return Err(Error::Domain(format!(
            "reference R1 = {r1_ref} must be below R0 = {}",
            params.r0
        )));
    }
    if !(tau1_ref > 0.0) {
        return Err(Error::Domain(format!(
            "reference lockdown duration must be > 0, got {tau1_ref}"
        )));
    }
    let denom = params.delta * params.delta * (params.r0 - r1_ref) * (params.r0 - r1_ref) * tau1_ref;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Domain("degenerate calibration denominator".into()));
    }
    Ok(delta_gdp / denom)
}

/// Inputs of the `K_e` calibration: a lockdown of `tau1_ref` days at level
/// `r1_ref` is taken to cost `delta_gdp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeCalibration {
    pub delta_gdp: f64,
    pub r1_ref: f64,
    pub tau1_ref: f64,
}

impl KeCalibration {
    pub fn ke(&self, params: &EpidemicParams) -> Result<f64> {
        calibrate_ke(self.delta_gdp, params, self.r1_ref, self.tau1_ref)
    }
}

/// Constraints decidable from the plan alone, in reporting order.
pub fn static_violation(plan: &PolicyPlan, cost: &CostParams) -> Option<Constraint> {
    if plan.tau1 < cost.t_min {
        Some(Constraint::TMin)
    } else if !gap_ok(plan.r1, plan.r2, cost.r_gap) {
        Some(Constraint::RGap)
    } else {
        None
    }
}

#[inline]
pub(crate) fn gap_ok(r1: f64, r2: f64, r_gap: f64) -> bool {
    r2 - r1 > r_gap + GAP_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violated: Option<Constraint>,
    pub peak_icu: f64,
}

/// Checks the ICU bound on the daily samples, then `τ1 ≥ T_min`, then the
/// `R2 > R1 + r_gap` gap; the first failure is reported.
pub fn check_feasibility(
    traj: &Trajectory,
    plan: &PolicyPlan,
    cost: &CostParams,
    params: &EpidemicParams,
) -> Feasibility {
    let peak_i = traj.i.iter().copied().fold(0.0, f64::max);
    let peak_icu = cost.sigma_icu * params.population * peak_i;
    let violated = if peak_icu > cost.icu_capacity {
        Some(Constraint::Icu)
    } else {
        static_violation(plan, cost)
    };
    Feasibility {
        feasible: violated.is_none(),
        violated,
        peak_icu,
    }
}

/// Evaluates a plan on an already simulated trajectory.
pub fn evaluate_trajectory(
    traj: &Trajectory,
    plan: &PolicyPlan,
    params: &EpidemicParams,
    cost: &CostParams,
) -> Evaluation {
    let economic = economic_cost(plan, params, cost);
    let depletion = traj.s_initial() - traj.s_final();
    let health = cost.kh * depletion;
    let verdict = check_feasibility(traj, plan, cost, params);
    Evaluation {
        economic_cost: economic,
        health_cost: health,
        total_cost: cost.alpha * economic + (1.0 - cost.alpha) * health,
        infected_total: params.population * depletion,
        peak_icu: verdict.peak_icu,
        feasible: verdict.feasible,
        violated_constraint: verdict.violated,
    }
}

/// Simulates `plan` and evaluates the full objective and constraints.
pub fn evaluate(
    plan: &PolicyPlan,
    params: &EpidemicParams,
    drift: &DriftModel,
    cost: &CostParams,
    cfg: &IntegratorConfig,
) -> Result<Evaluation> {
    cost.validate()?;
    let traj = simulate_policy(params, plan, drift, cfg)?;
    Ok(evaluate_trajectory(&traj, plan, params, cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn france() -> EpidemicParams {
        EpidemicParams::new(3.5, 0.1857, 0.16, 66e6, 1.33e5 / 66e6).unwrap()
    }

    fn cost(ke: f64) -> CostParams {
        CostParams {
            alpha: 1e-4,
            ke,
            kh: 66e6,
            mu1: 1.41,
            mu2: 1.3,
            sigma_icu: 0.015,
            icu_capacity: 15e3,
            t_min: 30,
            r_gap: 0.2,
        }
    }

    fn plan(tau0: u32, tau1: u32, tau2: u32, r: [f64; 3], horizon: u32) -> PolicyPlan {
        PolicyPlan {
            tau0,
            tau1,
            tau2,
            r1: r[0],
            r2: r[1],
            r3: r[2],
            horizon,
        }
    }

    #[test]
    fn zero_control_costs_nothing() {
        let p = plan(3, 30, 60, [3.5, 3.5, 3.5], 300);
        assert_eq!(economic_cost(&p, &france(), &cost(7e9)), 0.0);
    }

    #[test]
    fn calibrated_lockdown_term_matches_gdp_loss() {
        let params = france();
        let ke = calibrate_ke(120e9, &params, 0.6, 55.0).unwrap();
        // 120e9 / (0.1857² · 2.9² · 55), evaluated independently
        let oracle = 120e9 / (0.034_484_49 * 8.41 * 55.0);
        assert!((ke - oracle).abs() / oracle < 1e-12);
        assert!((ke - 7.5231e9).abs() < 1e6, "ke = {ke}");
        let p = plan(17, 55, 0, [0.6, 3.5, 3.5], 72);
        let e = economic_cost(&p, &params, &cost(ke));
        assert!((e - 120e9).abs() / 120e9 < 1e-12);
    }

    #[test]
    fn closed_form_cost_for_a_reference_plan() {
        let params = france();
        let ke = calibrate_ke(120e9, &params, 0.6, 55.0).unwrap();
        let p = plan(3, 30, 60, [0.4, 0.9, 1.1], 300);
        // ke·δ²·[3.1²·30 + 2.6²·60/1.41² + 2.4²·207/1.3²], term by term
        let terms = 9.61 * 30.0 + 6.76 * 60.0 / 1.9881 + 5.76 * 207.0 / 1.69;
        let expected = ke * 0.034_484_49 * terms;
        let got = economic_cost(&p, &params, &cost(ke));
        assert!((got - expected).abs() / expected < 1e-12);
        assert!((got - 3.107_543_856e11).abs() / 3.1e11 < 1e-9, "got {got}");
    }

    #[test]
    fn calibration_guards() {
        let params = france();
        assert!(calibrate_ke(1.0, &params, 3.5, 10.0).is_err());
        assert!(calibrate_ke(1.0, &params, 0.5, 0.0).is_err());
    }

    #[test]
    fn constraint_reporting_order() {
        let c = cost(7e9);
        let short = plan(3, 29, 60, [0.4, 0.9, 1.1], 300);
        assert_eq!(static_violation(&short, &c), Some(Constraint::TMin));
        let close = plan(3, 30, 60, [0.6, 0.7, 1.1], 300);
        assert_eq!(static_violation(&close, &c), Some(Constraint::RGap));
        let exact_gap = plan(3, 30, 60, [0.4, 0.6, 1.1], 300);
        assert_eq!(static_violation(&exact_gap, &c), Some(Constraint::RGap));
        let ok = plan(3, 30, 60, [0.4, 0.7, 1.1], 300);
        assert_eq!(static_violation(&ok, &c), None);
    }

    #[test]
    fn icu_threshold_fraction() {
        let f = cost(7e9).max_infected_fraction(66e6);
        assert!((f - 0.015_151_515).abs() < 1e-8);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut c = cost(7e9);
        c.mu1 = 0.5;
        assert!(c.validate().is_err());
        let mut c = cost(7e9);
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        let mut c = cost(7e9);
        c.sigma_icu = -0.1;
        assert!(c.validate().is_err());
    }
}
