//! Loads a scenario from a TOML document, overriding a few preset values,
//! and simulates an explicit policy under it.
//!
//!     cargo run --example custom_scenario

use seir_phase::cost::evaluate;
use seir_phase::model::PolicyPlan;
use seir_phase::scenario::load_scenario;

const DOC: &str = r#"
version = 1
base = "france"
label = "milder epidemic, no relief after lockdown"
horizon = 240

[epidemic]
r0 = 2.5

[cost]
mu1 = 1.0
mu2 = 1.0
"#;

fn main() -> seir_phase::Result<()> {
    let sc = load_scenario(DOC)?;
    for note in &sc.resolution {
        println!("  {note}");
    }
    let plan = PolicyPlan {
        tau0: 5,
        tau1: 40,
        tau2: 60,
        r1: 0.5,
        r2: 0.9,
        r3: 1.1,
        horizon: sc.horizon,
    };
    let eval = evaluate(&plan, &sc.params, &sc.drift, &sc.cost, &sc.integrator)?;
    println!("{}: {eval:#?}", sc.label);
    println!("\nresolved scenario:\n{}", sc.to_toml());
    Ok(())
}
