mod common;

use common::{compare_with_oracle, mini_case};
use seir_phase::cost::{evaluate_trajectory, CostParams};
use seir_phase::model::{simulate_policy, IntegratorConfig};
use seir_phase::optimizer::{grid_search, GridSpec, SearchProblem};
use seir_phase::scenario::{france_tradeoff_preset, french_policy_plan};
use seir_phase::Error;

#[test]
fn memoized_search_matches_brute_force_on_random_grids() {
    for seed in 0..20 {
        let case = mini_case(seed);
        if let Err(msg) = compare_with_oracle(&case) {
            panic!("seed {seed}: {msg}");
        }
    }
}

#[test]
fn singleton_grid_echoes_its_candidate() {
    let sc = france_tradeoff_preset();
    let plan = french_policy_plan(sc.horizon);
    let grid = GridSpec::singleton(&plan);
    let problem = SearchProblem {
        grid: &grid,
        ..sc.problem()
    };
    let res = grid_search(&problem, &sc.cost).unwrap();
    assert_eq!(res.best_plan, plan);
    let traj = simulate_policy(&sc.params, &plan, &sc.drift, &sc.integrator).unwrap();
    assert_eq!(res.best_eval, evaluate_trajectory(&traj, &plan, &sc.params, &sc.cost));
    assert_eq!((res.n_evaluated, res.n_feasible, res.n_pruned), (1, 1, 0));
}

#[test]
fn infeasible_grid_reports_the_least_violating_candidate() {
    let sc = france_tradeoff_preset();
    let mut grid = GridSpec::singleton(&french_policy_plan(sc.horizon));
    grid.r3_values = vec![0.9, 1.5];
    grid.tau2_values = vec![60, 80];
    let cost = CostParams {
        icu_capacity: 100.0,
        ..sc.cost
    };
    let problem = SearchProblem {
        grid: &grid,
        ..sc.problem()
    };
    let Err(Error::InfeasibleGrid {
        evaluated,
        least_violating: Some(least),
    }) = grid_search(&problem, &cost)
    else {
        panic!("expected an infeasible grid");
    };
    assert_eq!(evaluated, 4);
    let (plan, eval) = *least;
    // the least violating candidate has the smallest peak over the grid
    for p in grid.plans(sc.horizon) {
        let traj = simulate_policy(&sc.params, &p, &sc.drift, &sc.integrator).unwrap();
        let e = evaluate_trajectory(&traj, &p, &sc.params, &cost);
        assert!(eval.peak_icu <= e.peak_icu, "{plan:?} beaten by {p:?}");
    }
    assert!(!eval.feasible);
}

#[test]
fn equal_objectives_give_identical_results() {
    let case = mini_case(3);
    let cfg = IntegratorConfig::default();
    let problem = SearchProblem {
        grid: &case.grid,
        params: &case.params,
        drift: &case.drift,
        integrator: &cfg,
        horizon: case.horizon,
    };
    let a = grid_search(&problem, &case.cost);
    let b = grid_search(&problem, &case.cost);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}
