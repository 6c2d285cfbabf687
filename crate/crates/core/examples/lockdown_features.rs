//! Optimal lockdown start and duration as the weight varies, with and
//! without cheaper post-lockdown phases. The minimum lockdown duration is
//! relaxed to one day so the duration is free.
//!
//!     cargo run --release --example lockdown_features

use seir_phase::cli::log_space;
use seir_phase::cost::CostParams;
use seir_phase::optimizer::{lockdown_feature_sweep, GridSpec};
use seir_phase::scenario::france_preset;

fn main() -> seir_phase::Result<()> {
    let mut sc = france_preset();
    sc.cost = CostParams { t_min: 1, ..sc.cost };
    sc.grid = GridSpec::coarse(1);
    let alphas = log_space(1e-6, 1e-4, 5);
    let rows = lockdown_feature_sweep(&alphas, &[(1.0, 1.0), (1.41, 1.3)], &sc.problem(), &sc.cost)?;
    println!("{:>9} {:>5} {:>5} {:>5} {:>5}", "alpha", "mu1", "mu2", "tau0", "tau1");
    for r in rows {
        let f = r.input;
        let p = r.outcome?.best_plan;
        println!("{:>9.2e} {:>5} {:>5} {:>5} {:>5}", f.alpha, f.mu1, f.mu2, p.tau0, p.tau1);
    }
    Ok(())
}
