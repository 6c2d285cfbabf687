//! Replays the French policy to the end of 2020 with different adjustment
//! levels from September 30 and reports the ICU peak of each.
//!
//!     cargo run --release --example adjustment_phase

use seir_phase::optimizer::{adjustment_sweep, max_r3_below};
use seir_phase::scenario::{france_preset, french_policy_with_adjustment, FRENCH_ADJUSTMENT_START};

fn main() -> seir_phase::Result<()> {
    let sc = france_preset().with_horizon(306)?;
    let prefix = french_policy_with_adjustment(sc.horizon, FRENCH_ADJUSTMENT_START, sc.params.r0)?;
    let below_1_2 = max_r3_below(1.2, prefix.adjustment_days(), &sc.params, &sc.drift)
        .expect("a level exists")
        - 1e-3;
    let levels = [sc.params.r0, 1.5, 1.2, below_1_2, 0.9, 0.6];
    let rows = adjustment_sweep(&prefix, &levels, &sc.params, &sc.drift, &sc.cost, &sc.integrator)?;
    println!("{:>6} {:>10} {:>6} {:>8} {}", "R3", "peak ICU", "day", "max R(t)", "within capacity");
    for r in rows {
        println!(
            "{:>6.3} {:>10.0} {:>6} {:>8.3} {}",
            r.r3, r.peak_icu, r.peak_day, r.max_r_eff_adjustment, r.icu_ok
        );
    }
    Ok(())
}
