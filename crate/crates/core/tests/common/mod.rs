//! Shared fixtures: a brute-force reference search and random mini-grids.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seir_phase::cost::{evaluate_trajectory, static_violation, CostParams, Evaluation};
use seir_phase::model::{simulate_policy, DriftModel, EpidemicParams, IntegratorConfig, PolicyPlan};
use seir_phase::optimizer::GridSpec;
use seir_phase::scenario::france_preset;

/// Simulates every candidate from day 0 and keeps the cheapest feasible one.
/// Also returns the number of statically admissible candidates.
pub fn naive_search(
    grid: &GridSpec,
    params: &EpidemicParams,
    drift: &DriftModel,
    cost: &CostParams,
    cfg: &IntegratorConfig,
    horizon: u32,
) -> (Option<(PolicyPlan, Evaluation)>, u64, u64) {
    let mut best: Option<(PolicyPlan, Evaluation)> = None;
    let (mut admissible, mut feasible) = (0, 0);
    for plan in grid.plans(horizon) {
        if plan.tau0 + plan.tau1 + plan.tau2 > horizon || static_violation(&plan, cost).is_some() {
            continue;
        }
        admissible += 1;
        let traj = simulate_policy(params, &plan, drift, cfg).expect("valid candidate");
        let eval = evaluate_trajectory(&traj, &plan, params, cost);
        if !eval.feasible {
            continue;
        }
        feasible += 1;
        let better = match &best {
            None => true,
            Some((bp, be)) => eval
                .total_cost
                .total_cmp(&be.total_cost)
                .then_with(|| plan.tie_break_cmp(bp))
                .is_lt(),
        };
        if better {
            best = Some((plan, eval));
        }
    }
    (best, admissible, feasible)
}

pub struct MiniCase {
    pub grid: GridSpec,
    pub params: EpidemicParams,
    pub drift: DriftModel,
    pub cost: CostParams,
    pub horizon: u32,
}

fn pick<T: Copy + PartialOrd, R: Rng>(rng: &mut R, pool: &[T], max: usize) -> Vec<T> {
    let n = rng.gen_range(2..=max);
    let mut v: Vec<T> = pool.choose_multiple(rng, n).copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// A random grid of 2 to 3 values per duration axis and 2 per level axis around the France
/// calibration, with randomized constraints so that both feasible and
/// infeasible grids occur.
pub fn mini_case(seed: u64) -> MiniCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.gen_range(60..=120);
    let days: Vec<u32> = (0..=40).collect();
    let levels: Vec<f64> = (2..=35).map(|k| k as f64 / 10.0).collect();
    let grid = GridSpec {
        tau0_values: pick(&mut rng, &days[..=15], 3),
        tau1_values: pick(&mut rng, &days, 3),
        tau2_values: pick(&mut rng, &days, 3),
        r1_values: pick(&mut rng, &levels[..10], 2),
        r2_values: pick(&mut rng, &levels, 2),
        r3_values: pick(&mut rng, &levels, 2),
    };
    let base = france_preset();
    let params = EpidemicParams {
        r0: rng.gen_range(2.0..3.5),
        exposed0: rng.gen_range(1e-4..3e-3),
        ..base.params
    };
    let cost = CostParams {
        alpha: 10f64.powf(rng.gen_range(-7.0..-3.0)),
        mu1: rng.gen_range(1.0..1.5),
        mu2: rng.gen_range(1.0..1.5),
        icu_capacity: rng.gen_range(5e3..6e4),
        t_min: rng.gen_range(0..=20),
        r_gap: rng.gen_range(0.0..0.3),
        ..base.cost
    };
    MiniCase {
        grid,
        params,
        drift: base.drift,
        cost,
        horizon,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Runs the memoized search and the brute-force loop on `case` and
/// describes the first disagreement.
pub fn compare_with_oracle(case: &MiniCase) -> Result<(), String> {
    use seir_phase::optimizer::{grid_search, SearchProblem};
    use seir_phase::Error;

    let cfg = IntegratorConfig::default();
    let problem = SearchProblem {
        grid: &case.grid,
        params: &case.params,
        drift: &case.drift,
        integrator: &cfg,
        horizon: case.horizon,
    };
    let (naive, admissible, feasible) =
        naive_search(&case.grid, &case.params, &case.drift, &case.cost, &cfg, case.horizon);
    match (grid_search(&problem, &case.cost), naive) {
        (Ok(res), Some((plan, eval))) => {
            if res.best_plan != plan {
                return Err(format!("best plan {:?} vs oracle {:?}", res.best_plan, plan));
            }
            let d = rel_diff(res.best_eval.total_cost, eval.total_cost);
            if d > 1e-12 {
                return Err(format!("total cost differs by {d:e} relative"));
            }
            if res.n_evaluated != admissible || res.n_feasible != feasible {
                return Err(format!(
                    "counts ({}, {}) vs oracle ({admissible}, {feasible})",
                    res.n_evaluated, res.n_feasible
                ));
            }
            if res.n_evaluated + res.n_pruned != case.grid.candidate_count() {
                return Err("evaluated + pruned does not cover the grid".into());
            }
            Ok(())
        }
        (Err(Error::InfeasibleGrid { evaluated, .. }), None) if evaluated == admissible => Ok(()),
        (got, want) => Err(format!("search {got:?} vs oracle {want:?}")),
    }
}
