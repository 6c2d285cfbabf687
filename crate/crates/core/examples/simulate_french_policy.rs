//! Simulates the policy applied in France and prints its costs and peak
//! ICU load, then the first weeks of the trajectory.
//!
//!     cargo run --release --example simulate_french_policy

use seir_phase::cost::evaluate_trajectory;
use seir_phase::model::simulate_policy;
use seir_phase::scenario::{france_tradeoff_preset, french_policy_plan};

fn main() -> seir_phase::Result<()> {
    let sc = france_tradeoff_preset();
    let plan = french_policy_plan(sc.horizon);
    let traj = simulate_policy(&sc.params, &plan, &sc.drift, &sc.integrator)?;
    let eval = evaluate_trajectory(&traj, &plan, &sc.params, &sc.cost);

    println!("plan: {plan:?}");
    println!("GDP loss        {:>12.3e}", eval.economic_cost);
    println!("infected        {:>12.3e}", eval.infected_total);
    println!("peak ICU load   {:>12.0} (capacity {})", eval.peak_icu, sc.cost.icu_capacity);
    let (day, peak) = traj.peak_infected();
    println!("peak N·i        {:>12.0} on day {day}", peak * sc.params.population);

    println!("\nday      N·i    R(t)");
    let ni = traj.infected_persons();
    for k in (0..traj.len()).step_by(7).take(12) {
        println!("{:>3} {:>8.0} {:>7.3}", traj.days[k], ni[k], traj.r_eff[k]);
    }
    Ok(())
}
