//! Exhaustive search for the best four-phase policy over March 1 to
//! September 27 (about 100 s on one core in release mode).
//!
//!     cargo run --release --example optimize_policy [alpha]

use seir_phase::cost::CostParams;
use seir_phase::optimizer::grid_search;
use seir_phase::scenario::france_tradeoff_preset;

fn main() -> seir_phase::Result<()> {
    let sc = france_tradeoff_preset();
    let alpha = std::env::args().nth(1).map_or(1e-4, |a| a.parse().expect("alpha is a number"));
    let cost = CostParams { alpha, ..sc.cost };

    let started = std::time::Instant::now();
    let res = grid_search(&sc.problem(), &cost)?;
    let p = res.best_plan;
    println!("alpha = {alpha:e}, searched in {:.1?}", started.elapsed());
    println!("lockdown from day {} for {} days at R1 = {}", p.tau0, p.tau1, p.r1);
    println!("post-lockdown for {} days at R2 = {}, then R3 = {}", p.tau2, p.r2, p.r3);
    println!(
        "GDP loss {:.3e}, infected {:.3e}, peak ICU {:.0}",
        res.best_eval.economic_cost, res.best_eval.infected_total, res.best_eval.peak_icu
    );
    println!(
        "{} admissible candidates, {} feasible, {} pruned by static constraints",
        res.n_evaluated, res.n_feasible, res.n_pruned
    );
    Ok(())
}
