//! Re-optimizes the policy for a milder epidemic. `K_e` is recalibrated for
//! each `R0` and grid levels above `R0` are dropped.
//!
//!     cargo run --release --example r0_sensitivity

use seir_phase::optimizer::r0_sensitivity;
use seir_phase::scenario::france_preset;

fn main() -> seir_phase::Result<()> {
    let sc = france_preset();
    for row in r0_sensitivity(&[2.0, 3.5], &sc.problem(), &sc.cost, &sc.calibration)? {
        let res = row.outcome?;
        let p = res.best_plan;
        println!(
            "R0 = {}: lockdown on day {} for {} days at R1 = {} (GDP {:.3e}, infected {:.3e})",
            row.input, p.tau0, p.tau1, p.r1, res.best_eval.economic_cost, res.best_eval.infected_total
        );
    }
    Ok(())
}
