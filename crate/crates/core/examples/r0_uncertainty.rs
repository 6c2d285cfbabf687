//! How far the optimal lockdown start and level move when `R0` is only
//! known up to Gaussian noise. Runs on a thinned grid with few samples so
//! that it finishes in a few minutes.
//!
//!     cargo run --release --example r0_uncertainty [seed]

use seir_phase::optimizer::{day_range, mc_r0_uncertainty, UncertaintySpec};
use seir_phase::scenario::france_tradeoff_preset;

fn main() -> seir_phase::Result<()> {
    let mut sc = france_tradeoff_preset();
    sc.grid.tau0_values = day_range(1, 15, 1);
    sc.grid.tau1_values = day_range(30, 90, 10);
    sc.grid.tau2_values = day_range(1, 120, 20);
    let seed = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed is an integer"));
    let spec = UncertaintySpec {
        sigma_levels: vec![0.0, 0.25, 0.5, 1.0],
        n_samples: 8,
        seed,
        r_min: 1.0,
        r_max: 4.0,
    };
    let rep = mc_r0_uncertainty(&spec, &sc.problem(), &sc.cost, &sc.calibration)?;
    println!("baseline: tau0 = {}, R1 = {}", rep.baseline_tau0, rep.baseline_r1);
    println!("{:>6} {:>10} {:>10}", "sigma", "E|dtau0|", "E|dR1|");
    for k in 0..rep.sigma_levels.len() {
        println!("{:>6} {:>10.3} {:>10.3}", rep.sigma_levels[k], rep.bias_tau0[k], rep.bias_r1[k]);
    }
    Ok(())
}
