use proptest::prelude::*;

use seir_phase::cost::{
    calibrate_ke, check_feasibility, economic_cost, evaluate_trajectory, lockdown_term, static_violation,
    CostParams,
};
use seir_phase::model::{
    simulate_policy, DriftModel, EpidemicParams, IntegratorConfig, Phase, PolicyPlan, Trajectory,
};
use seir_phase::scenario::{france_preset, french_policy_plan};

fn arb_params() -> impl Strategy<Value = EpidemicParams> {
    (0.5f64..5.0, 0.05f64..0.5, 0.05f64..0.5, 0.0f64..0.05).prop_map(|(r0, delta, gamma, exposed0)| {
        EpidemicParams {
            r0,
            delta,
            gamma,
            population: 66e6,
            exposed0,
        }
    })
}

/// A plan with its drift, the slopes kept within the horizon guard.
fn arb_policy() -> impl Strategy<Value = (PolicyPlan, DriftModel)> {
    (1u32..=300).prop_flat_map(|horizon| {
        let max_slope = (1.0 / horizon as f64).min(0.004);
        (
            0..=horizon,
            0..=horizon,
            0..=horizon,
            prop::array::uniform3(0.0f64..4.0),
            prop::array::uniform3(0.0..=max_slope),
        )
            .prop_map(move |(a, b, c, r, slopes)| {
                // scale the three durations into the horizon
                let total = (a + b + c).max(1) as f64;
                let fit = |x: u32| ((x as f64 / total) * horizon as f64).floor() as u32;
                let (tau0, tau1) = (fit(a).min(horizon), fit(b));
                let tau1 = tau1.min(horizon - tau0);
                let tau2 = fit(c).min(horizon - tau0 - tau1);
                let plan = PolicyPlan {
                    tau0,
                    tau1,
                    tau2,
                    r1: r[0],
                    r2: r[1],
                    r3: r[2],
                    horizon,
                };
                let drift = DriftModel {
                    a1: slopes[0],
                    a2: slopes[1],
                    a3: slopes[2],
                };
                (plan, drift)
            })
    })
}

fn simulate(params: &EpidemicParams, plan: &PolicyPlan, drift: &DriftModel) -> Trajectory {
    simulate_policy(params, plan, drift, &IntegratorConfig::default()).expect("valid inputs")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compartments_are_conserved_bounded_and_monotone(
        params in arb_params(),
        (plan, drift) in arb_policy(),
    ) {
        let traj = simulate(&params, &plan, &drift);
        prop_assert_eq!(traj.len(), plan.horizon as usize + 1);
        for k in 0..traj.len() {
            let y = traj.state(k);
            prop_assert!((y.total() - 1.0).abs() <= 1e-9);
            prop_assert!(y.0.iter().all(|c| (0.0..=1.0).contains(c)));
            if k > 0 {
                prop_assert!(traj.s[k] <= traj.s[k - 1]);
                prop_assert!(traj.r[k] >= traj.r[k - 1]);
            }
        }
    }

    #[test]
    fn reproduction_number_starts_each_phase_at_its_target(
        params in arb_params(),
        (plan, drift) in arb_policy(),
    ) {
        let traj = simulate(&params, &plan, &drift);
        let starts = plan.phase_starts();
        for (k, phase) in [Phase::Lockdown, Phase::PostLockdown, Phase::Adjustment].into_iter().enumerate() {
            let start = starts[k + 1] as usize;
            let next = starts.get(k + 2).map_or(plan.horizon as usize + 1, |&s| s as usize);
            if start < next && start < traj.len() {
                prop_assert_eq!(traj.phase[start], phase);
                prop_assert!((traj.r_eff[start] - plan.target(phase, params.r0)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn drift_pulls_the_reproduction_number_back_up(
        params in arb_params(),
        (plan, drift) in arb_policy(),
    ) {
        let traj = simulate(&params, &plan, &drift);
        for k in 1..traj.len() {
            let phase = traj.phase[k];
            if phase != traj.phase[k - 1] || phase == Phase::Free {
                continue;
            }
            let slope = drift.slope(phase);
            if slope > 0.0 && plan.target(phase, params.r0) < params.r0 {
                prop_assert!(traj.r_eff[k] > traj.r_eff[k - 1]);
            }
        }
    }

    #[test]
    fn zero_control_ignores_timing_and_drift(
        params in arb_params(),
        (plan, drift) in arb_policy(),
    ) {
        let r0 = params.r0;
        let free = PolicyPlan { r1: r0, r2: r0, r3: r0, ..plan };
        let controlled = simulate(&params, &free, &drift);
        let uncontrolled = simulate(
            &params,
            &PolicyPlan { tau0: plan.horizon, tau1: 0, tau2: 0, ..free },
            &DriftModel::NONE,
        );
        for k in 0..controlled.len() {
            for c in 0..4 {
                prop_assert!((controlled.state(k).0[c] - uncontrolled.state(k).0[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn economic_cost_ignores_drift_and_falls_with_relief(
        params in arb_params(),
        (plan, drift) in arb_policy(),
        mu in 1.0f64..2.0,
    ) {
        let base = france_preset().cost;
        let cost = CostParams { mu1: mu, mu2: mu, ..base };
        let e = economic_cost(&plan, &params, &cost);
        let traj = simulate(&params, &plan, &drift);
        let still = simulate(&params, &plan, &DriftModel::NONE);
        prop_assert_eq!(evaluate_trajectory(&traj, &plan, &params, &cost).economic_cost, e);
        prop_assert_eq!(evaluate_trajectory(&still, &plan, &params, &cost).economic_cost, e);

        let relieved = CostParams { mu1: mu + 0.1, ..cost };
        if plan.tau2 > 0 && plan.r2 != params.r0 {
            prop_assert!(economic_cost(&plan, &params, &relieved) < e);
        }
        let relieved = CostParams { mu2: mu + 0.1, ..cost };
        if plan.adjustment_days() > 0 && plan.r3 != params.r0 {
            prop_assert!(economic_cost(&plan, &params, &relieved) < e);
        }
    }

    #[test]
    fn total_cost_is_affine_in_alpha(
        params in arb_params(),
        (plan, drift) in arb_policy(),
        alpha in 0.0f64..=1.0,
    ) {
        let traj = simulate(&params, &plan, &drift);
        let base = france_preset().cost;
        let at = |alpha: f64| evaluate_trajectory(&traj, &plan, &params, &CostParams { alpha, ..base });
        let (e, h) = (at(1.0).total_cost, at(0.0).total_cost);
        prop_assert_eq!(e, at(alpha).economic_cost);
        prop_assert_eq!(h, at(alpha).health_cost);
        let t = at(alpha).total_cost;
        prop_assert!((t - (alpha * e + (1.0 - alpha) * h)).abs() <= 1e-12 * t.abs().max(1.0));
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h == 0.0, traj.s_final() == traj.s_initial());
    }

    #[test]
    fn more_icu_capacity_never_hurts_feasibility(
        params in arb_params(),
        (plan, drift) in arb_policy(),
        cap in 1e2f64..1e6,
        extra in 0.0f64..1e6,
    ) {
        let traj = simulate(&params, &plan, &drift);
        let base = france_preset().cost;
        let small = check_feasibility(&traj, &plan, &CostParams { icu_capacity: cap, ..base }, &params);
        let large = check_feasibility(&traj, &plan, &CostParams { icu_capacity: cap + extra, ..base }, &params);
        prop_assert!(!small.feasible || large.feasible);
        // static filters only remove candidates the full check rejects
        if static_violation(&plan, &base).is_some() {
            prop_assert!(!large.feasible);
        }
    }

    #[test]
    fn calibration_reproduces_the_gdp_loss(
        delta_gdp in 1e9f64..1e12,
        params in arb_params(),
        r1_frac in 0.0f64..0.99,
        tau1 in 1.0f64..120.0,
    ) {
        let r1 = r1_frac * params.r0;
        let ke = calibrate_ke(delta_gdp, &params, r1, tau1).unwrap();
        let back = lockdown_term(ke, &params, r1, tau1);
        prop_assert!((back - delta_gdp).abs() <= 1e-9 * delta_gdp);
    }
}

#[test]
fn uncontrolled_france_peak_matches_a_fine_step_reference() {
    // 1000 substeps/day reference: peak i = 0.16012214996 on day 50,
    // s(300) = 0.0339374517
    let sc = france_preset();
    let r0 = sc.params.r0;
    let plan = PolicyPlan {
        r1: r0,
        r2: r0,
        r3: r0,
        ..french_policy_plan(300)
    };
    let traj = simulate(&sc.params, &plan, &sc.drift);
    let (day, peak) = traj.peak_infected();
    assert_eq!(day, 50);
    assert!((peak - 0.1601221499646496).abs() < 1e-8, "{peak}");
    assert!((traj.s_final() - 0.03393745173007272).abs() < 1e-8);
}

#[test]
fn doubling_substeps_barely_moves_the_final_state() {
    let sc = france_preset();
    let r0 = sc.params.r0;
    let free = PolicyPlan {
        r1: r0,
        r2: r0,
        r3: r0,
        ..french_policy_plan(300)
    };
    for plan in [free, french_policy_plan(300)] {
        for n in [4, 20] {
            let run = |n| {
                simulate_policy(&sc.params, &plan, &sc.drift, &IntegratorConfig::rk4(n))
                    .unwrap()
                    .s_final()
            };
            let (coarse, fine) = (run(n), run(2 * n));
            assert!((coarse - fine).abs() < 1e-7, "{n} substeps: {coarse} vs {fine}");
        }
    }
}

#[test]
fn infections_fall_after_switching_below_one_without_drift() {
    let sc = france_preset();
    let plan = seir_phase::scenario::french_policy_with_adjustment(300, 213, 0.8).unwrap();
    let traj = simulate(&sc.params, &plan, &DriftModel::NONE);
    // allow a short transient while the exposed pool drains
    let settled = 213 + 20;
    for k in settled + 1..traj.len() {
        assert!(traj.i[k] <= traj.i[k - 1], "i rises on day {k}");
    }
}
