//! Exhaustive search over the policy grid.
//!
//! The grid is walked as a tree `τ0 → (R1, τ1) → (R2, τ2) → R3`. Because a
//! phase's dynamics do not depend on how long it lasts, a single integration
//! of phase 1 from `τ0` at level `R1` yields the state at `τ0+τ1` for every
//! `τ1` of the grid, and likewise for phase 2. Only the final phase is
//! integrated once per candidate. Boundary states are bit-identical to those
//! of a fresh run from `t = 0`, since every step depends on the phase start
//! and never on its end.
//!
//! Health cost and the ICU verdict do not depend on `α`, `μ1`, `μ2` or
//! `K_e`, so one walk serves any number of objectives.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::cost::{economic_cost_with, gap_ok, CostParams, Evaluation};
use crate::error::{Error, Result};
use crate::model::{
    integrate_segment, DriftModel, EpidemicParams, IntegratorConfig, Phase, PolicyPlan, Segment,
    SeirState,
};

use super::{GridSpec, SearchResult};

/// Everything a grid search needs besides the objective weights.
#[derive(Debug, Clone, Copy)]
pub struct SearchProblem<'a> {
    pub grid: &'a GridSpec,
    pub params: &'a EpidemicParams,
    pub drift: &'a DriftModel,
    pub integrator: &'a IntegratorConfig,
    pub horizon: u32,
}

impl SearchProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.drift.validate()?;
        self.drift.check_horizon(self.horizon)?;
        self.integrator.validate()?;
        self.grid.validate(self.horizon)
    }
}

/// Returns the feasible plan of the grid with the lowest total cost.
pub fn grid_search(problem: &SearchProblem<'_>, cost: &CostParams) -> Result<SearchResult> {
    grid_search_many(problem, std::slice::from_ref(cost))?
        .pop()
        .expect("one objective in, one result out")
}

/// Runs one walk of the grid and returns the optimum for each objective, in
/// input order. The objectives must agree on the constraint constants
/// (`sigma_icu`, `icu_capacity`, `r_gap`); `t_min` may differ.
pub fn grid_search_many(
    problem: &SearchProblem<'_>,
    costs: &[CostParams],
) -> Result<Vec<Result<SearchResult>>> {
    problem.validate()?;
    let Some(first) = costs.first() else {
        return Ok(Vec::new());
    };
    for c in costs {
        c.validate()?;
        if c.sigma_icu != first.sigma_icu
            || c.icu_capacity != first.icu_capacity
            || c.r_gap != first.r_gap
        {
            return Err(Error::Usage(
                "objectives in one search must share sigma_icu, icu_capacity and r_gap".into(),
            ));
        }
    }
    let limits = Limits {
        sigma_n: first.sigma_icu * problem.params.population,
        icu_capacity: first.icu_capacity,
        r_gap: first.r_gap,
    };
    let objectives: Vec<Objective> = costs.iter().map(Objective::Weighted).collect();
    let total = problem.grid.candidate_count();
    let tallies = walk(problem, &objectives, &limits)?;

    let mut out = Vec::with_capacity(costs.len());
    let mut diagnostics: Option<Option<Best>> = None;
    for (cost, tally) in costs.iter().zip(tallies) {
        match tally.best {
            Some(best) => out.push(Ok(SearchResult {
                best_plan: best.plan,
                best_eval: best.evaluation(problem.params, cost),
                n_evaluated: tally.evaluated,
                n_feasible: tally.feasible,
                n_pruned: total - tally.evaluated,
            })),
            None => {
                if diagnostics.is_none() {
                    diagnostics = Some(least_violating(problem, &limits, cost.t_min)?);
                }
                let least = diagnostics
                    .as_ref()
                    .and_then(Option::as_ref)
                    .map(|best| Box::new((best.plan, best.evaluation(problem.params, cost))));
                out.push(Err(Error::InfeasibleGrid {
                    evaluated: tally.evaluated,
                    least_violating: least,
                }));
            }
        }
    }
    Ok(out)
}

/// Candidate with the smallest peak ICU load among those passing the static
/// constraints, for reporting an infeasible grid.
fn least_violating(
    problem: &SearchProblem<'_>,
    limits: &Limits,
    t_min: u32,
) -> Result<Option<Best>> {
    let relaxed = Limits {
        icu_capacity: f64::INFINITY,
        ..*limits
    };
    Ok(walk(problem, &[Objective::PeakIcu { t_min }], &relaxed)?
        .pop()
        .and_then(|t| t.best))
}

#[derive(Debug, Clone, Copy)]
struct Limits {
    sigma_n: f64,
    icu_capacity: f64,
    r_gap: f64,
}

impl Limits {
    #[inline]
    fn exceeded(&self, peak_i: f64) -> bool {
        self.sigma_n * peak_i > self.icu_capacity
    }
}

#[derive(Debug, Clone, Copy)]
enum Objective<'a> {
    Weighted(&'a CostParams),
    PeakIcu { t_min: u32 },
}

impl Objective<'_> {
    fn t_min(&self) -> u32 {
        match self {
            Objective::Weighted(c) => c.t_min,
            Objective::PeakIcu { t_min } => *t_min,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    score: f64,
    plan: PolicyPlan,
    depletion: f64,
    peak_icu: f64,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        self.score
            .total_cmp(&other.score)
            .then_with(|| self.plan.tie_break_cmp(&other.plan))
            .is_lt()
    }

    fn evaluation(&self, params: &EpidemicParams, cost: &CostParams) -> Evaluation {
        let economic = economic_cost_with(&self.plan, params, cost.ke, cost.mu1, cost.mu2);
        let health = cost.kh * self.depletion;
        let feasible = self.peak_icu <= cost.icu_capacity;
        Evaluation {
            economic_cost: economic,
            health_cost: health,
            total_cost: cost.alpha * economic + (1.0 - cost.alpha) * health,
            infected_total: params.population * self.depletion,
            peak_icu: self.peak_icu,
            feasible,
            violated_constraint: (!feasible).then_some(crate::cost::Constraint::Icu),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    best: Option<Best>,
    evaluated: u64,
    feasible: u64,
}

impl Tally {
    fn offer(&mut self, candidate: Best) {
        self.feasible += 1;
        match &self.best {
            Some(current) if !candidate.beats(current) => {}
            _ => self.best = Some(candidate),
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.evaluated += other.evaluated;
        self.feasible += other.feasible;
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// State and running maximum of `i` at a phase boundary.
#[derive(Debug, Clone, Copy)]
struct Node {
    state: SeirState,
    peak_i: f64,
}

/// Integrates one phase from `start` and captures the node at each
/// requested boundary day (ascending). Stops once the ICU limit is exceeded;
/// boundaries past that point come back as `None`.
fn capture_boundaries(
    from: Node,
    seg: &Segment,
    boundaries: &[u32],
    problem: &SearchProblem<'_>,
    limits: &Limits,
) -> Result<Vec<Option<Node>>> {
    let mut out = vec![None; boundaries.len()];
    let mut next = 0;
    let mut peak_i = from.peak_i;
    while next < boundaries.len() && boundaries[next] == seg.start {
        out[next] = Some(from);
        next += 1;
    }
    if next == boundaries.len() || limits.exceeded(peak_i) {
        return Ok(out);
    }
    let seg = Segment {
        end: *boundaries.last().expect("non-empty"),
        ..*seg
    };
    integrate_segment(from.state, &seg, problem.params, problem.integrator, |day, y| {
        peak_i = peak_i.max(y.i());
        if limits.exceeded(peak_i) {
            return ControlFlow::Break(());
        }
        while next < boundaries.len() && boundaries[next] == day {
            out[next] = Some(Node {
                state: *y,
                peak_i,
            });
            next += 1;
        }
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

fn walk(
    problem: &SearchProblem<'_>,
    objectives: &[Objective<'_>],
    limits: &Limits,
) -> Result<Vec<Tally>> {
    let grid = problem.grid;
    let horizon = problem.horizon;
    let params = problem.params;
    let r0 = params.r0;
    let t_min_floor = objectives.iter().map(Objective::t_min).min().unwrap_or(0);

    // phase 0 is shared by every candidate
    let start = Node {
        state: params.initial_state(),
        peak_i: params.initial_state().i(),
    };
    let tau0s: Vec<u32> = grid.tau0_values.iter().copied().filter(|&t| t <= horizon).collect();
    let free = Segment::new(Phase::Free, 0, 0, r0, 0.0, r0);
    let free_nodes = capture_boundaries(start, &free, &tau0s, problem, limits)?;

    let r3_count = grid.r3_values.len() as u64;
    let gap_counts: Vec<u64> = grid
        .r1_values
        .iter()
        .map(|&r1| grid.r2_values.iter().filter(|&&r2| gap_ok(r1, r2, limits.r_gap)).count() as u64)
        .collect();
    // τ2 values with τ0+τ1+τ2 <= T, given the lockdown end
    let tau2_fitting = |t2: u32| grid.tau2_values.partition_point(|&d| t2 + d <= horizon) as u64;

    let items: Vec<(usize, usize)> = (0..tau0s.len())
        .flat_map(|a| (0..grid.r1_values.len()).map(move |b| (a, b)))
        .collect();

    let branch = |&(i0, i1): &(usize, usize)| -> Result<Vec<Tally>> {
        let mut tallies = vec![Tally::default(); objectives.len()];
        let tau0 = tau0s[i0];
        let r1 = grid.r1_values[i1];
        let tau1s: Vec<u32> = grid
            .tau1_values
            .iter()
            .copied()
            .filter(|&d| d >= t_min_floor && tau0 + d <= horizon)
            .collect();
        let r2s: Vec<f64> = grid
            .r2_values
            .iter()
            .copied()
            .filter(|&r2| gap_ok(r1, r2, limits.r_gap))
            .collect();
        if tau1s.is_empty() || r2s.is_empty() {
            return Ok(tallies);
        }
        // counts of statically admissible candidates below each lockdown node
        for &tau1 in &tau1s {
            let below = tau2_fitting(tau0 + tau1) * gap_counts[i1] * r3_count;
            for (t, obj) in tallies.iter_mut().zip(objectives) {
                if tau1 >= obj.t_min() {
                    t.evaluated += below;
                }
            }
        }
        let Some(free_node) = free_nodes[i0] else {
            return Ok(tallies);
        };

        let lock = Segment::new(Phase::Lockdown, tau0, 0, r1, problem.drift.a1, r0);
        let ends1: Vec<u32> = tau1s.iter().map(|d| tau0 + d).collect();
        let lock_nodes = capture_boundaries(free_node, &lock, &ends1, problem, limits)?;

        for (&tau1, node1) in tau1s.iter().zip(lock_nodes) {
            let Some(node1) = node1 else { continue };
            let t2 = tau0 + tau1;
            let n_tau2 = tau2_fitting(t2) as usize;
            if n_tau2 == 0 {
                continue;
            }
            let tau2s = &grid.tau2_values[..n_tau2];
            let ends2: Vec<u32> = tau2s.iter().map(|d| t2 + d).collect();
            for &r2 in &r2s {
                let post = Segment::new(Phase::PostLockdown, t2, 0, r2, problem.drift.a2, r0);
                let post_nodes = capture_boundaries(node1, &post, &ends2, problem, limits)?;
                for (&tau2, node2) in tau2s.iter().zip(post_nodes) {
                    let Some(node2) = node2 else { continue };
                    let t3 = t2 + tau2;
                    for &r3 in &grid.r3_values {
                        let Some(last) = finish(node2, t3, r3, problem, limits)? else {
                            continue;
                        };
                        let plan = PolicyPlan {
                            tau0,
                            tau1,
                            tau2,
                            r1,
                            r2,
                            r3,
                            horizon,
                        };
                        let depletion = start.state.s() - last.state.s();
                        let peak_icu = limits.sigma_n * last.peak_i;
                        for (t, obj) in tallies.iter_mut().zip(objectives) {
                            if tau1 < obj.t_min() {
                                continue;
                            }
                            t.offer(score(obj, &plan, params, depletion, peak_icu));
                        }
                    }
                }
            }
        }
        Ok(tallies)
    };

    items
        .par_iter()
        .map(branch)
        .try_reduce(
            || vec![Tally::default(); objectives.len()],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )
}

/// Integrates the adjustment phase to the horizon; `None` on ICU violation.
fn finish(
    node: Node,
    t3: u32,
    r3: f64,
    problem: &SearchProblem<'_>,
    limits: &Limits,
) -> Result<Option<Node>> {
    let seg = Segment::new(
        Phase::Adjustment,
        t3,
        problem.horizon,
        r3,
        problem.drift.a3,
        problem.params.r0,
    );
    let mut peak_i = node.peak_i;
    let (state, aborted) = integrate_segment(node.state, &seg, problem.params, problem.integrator, |_, y| {
        peak_i = peak_i.max(y.i());
        if limits.exceeded(peak_i) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok((!aborted).then_some(Node { state, peak_i }))
}

fn score(
    obj: &Objective<'_>,
    plan: &PolicyPlan,
    params: &EpidemicParams,
    depletion: f64,
    peak_icu: f64,
) -> Best {
    match obj {
        Objective::Weighted(cost) => {
            let economic = economic_cost_with(plan, params, cost.ke, cost.mu1, cost.mu2);
            let health = cost.kh * depletion;
            Best {
                score: cost.alpha * economic + (1.0 - cost.alpha) * health,
                plan: *plan,
                depletion,
                peak_icu,
            }
        }
        Objective::PeakIcu { .. } => Best {
            score: peak_icu,
            plan: *plan,
            depletion,
            peak_icu,
        },
    }
}
