//! Derives the economic conversion factor from the estimated GDP loss of the
//! spring lockdown and checks that it reproduces that loss.
//!
//!     cargo run --example calibrate_ke

use seir_phase::cost::{calibrate_ke, lockdown_term};
use seir_phase::scenario::{france_preset, PRINTED_KE};

fn main() -> seir_phase::Result<()> {
    let sc = france_preset();
    let cal = sc.calibration;
    let ke = calibrate_ke(cal.delta_gdp, &sc.params, cal.r1_ref, cal.tau1_ref)?;
    println!("K_e = {ke:.6e} currency·day");
    println!("lockdown term with K_e: {:.6e}", lockdown_term(ke, &sc.params, cal.r1_ref, cal.tau1_ref));
    println!(
        "reference K_e {PRINTED_KE:.4e} gives {:.6e}",
        lockdown_term(PRINTED_KE, &sc.params, cal.r1_ref, cal.tau1_ref)
    );
    Ok(())
}
