//! Compares the model against a reported active-case series. With no
//! argument a synthetic series (the model curve, heavily under-reported in
//! March and by 15% from June) stands in for real data.
//!
//!     cargo run --release --example validate_reported [reported.csv]

use std::path::Path;

use seir_phase::model::simulate_policy;
use seir_phase::report::{compare_reported, day_to_date, ReportedSeries};
use seir_phase::scenario::{france_preset, french_policy_plan};

fn main() -> seir_phase::Result<()> {
    let sc = france_preset().with_horizon(213)?;
    let traj = simulate_policy(&sc.params, &french_policy_plan(sc.horizon), &sc.drift, &sc.integrator)?;

    let reported = match std::env::args().nth(1) {
        Some(path) => ReportedSeries::from_path(Path::new(&path))?,
        None => {
            let ni = traj.infected_persons();
            ReportedSeries {
                dates: traj.days.iter().map(|&d| day_to_date(d)).collect(),
                active_cases: traj
                    .days
                    .iter()
                    .zip(&ni)
                    .map(|(&d, x)| x * (0.2 + 0.65 * (d as f64 / 90.0).min(1.0)))
                    .collect(),
            }
        }
    };
    let cmp = compare_reported(&traj, &reported, None)?;
    let s = cmp.summary;
    println!("{} days compared, summary over {}..{}", cmp.rows.len(), s.window_start, s.window_end);
    println!("max |residual| {:.0}, mean |residual| {:.0}", s.max_abs, s.mean_abs);
    println!("max relative {:.3}, mean relative {:.3}", s.max_rel, s.mean_rel);
    Ok(())
}
