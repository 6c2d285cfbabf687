//! GDP loss against infections for weights between 1e-7 and 1e-4. One walk
//! of the grid serves every weight.
//!
//!     cargo run --release --example tradeoff_curve > tradeoff.csv

use seir_phase::cli::log_space;
use seir_phase::optimizer::tradeoff_sweep;
use seir_phase::report::tradeoff_csv;
use seir_phase::scenario::france_tradeoff_preset;

fn main() -> seir_phase::Result<()> {
    let sc = france_tradeoff_preset();
    let alphas = log_space(1e-7, 1e-4, 10);
    let rows = tradeoff_sweep(&alphas, &sc.problem(), &sc.cost)?;
    for r in &rows {
        match &r.outcome {
            Ok(p) => eprintln!("alpha {:>9.2e}: GDP {:.3e}, infected {:.3e}", p.alpha, p.gdp_loss, p.infected_total),
            Err(e) => eprintln!("alpha {:>9.2e}: {e}", r.input),
        }
    }
    print!("{}", String::from_utf8_lossy(&tradeoff_csv(&rows)));
    Ok(())
}
