//! The `seir-phase` command line.
//!
//! Every flag can also be set through an environment variable named
//! `SEIR_PHASE_<FLAG>` (for example `SEIR_PHASE_SCENARIO=france-tradeoff`);
//! an explicit flag wins over the environment.
//!
//! Exit codes: 0 success, 2 usage, 3 config or invalid input, 4 numeric or
//! model-validity failure, 5 infeasible grid, 6 I/O or malformed CSV.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::cost::{calibrate_ke, evaluate_trajectory, lockdown_term, KeCalibration};
use crate::error::{Error, Result};
use crate::model::{simulate_policy, PolicyPlan};
use crate::optimizer::{
    adjustment_sweep, grid_search, level_range, lockdown_feature_sweep, max_r3_below, mc_r0_uncertainty,
    r0_sensitivity, tradeoff_sweep, GridSpec, SweepRow, UncertaintySpec,
};
use crate::report::{self, ReportedSeries, RunManifest};
use crate::scenario::{
    french_policy_plan, french_policy_with_adjustment, load_grid, load_scenario, preset, GridPreset, Scenario,
    FRENCH_ADJUSTMENT_START, PRESET_NAMES, PRINTED_KE,
};

pub const ENV_PREFIX: &str = "SEIR_PHASE_";

#[derive(Debug, Parser)]
#[command(name = "seir-phase", version, about = "Four-phase SEIR lockdown policy simulation and optimization")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Preset name (france, france-tradeoff) or path to a scenario TOML file.
    #[arg(long, global = true, env = "SEIR_PHASE_SCENARIO", default_value = "france")]
    pub scenario: String,
    /// Output directory.
    #[arg(long, global = true, env = "SEIR_PHASE_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Master seed for Monte Carlo commands.
    #[arg(long, global = true, env = "SEIR_PHASE_SEED", default_value_t = 2020)]
    pub seed: u64,
    /// Policy grid: coarse, full, or path to a grid TOML file.
    #[arg(long, global = true, env = "SEIR_PHASE_GRID")]
    pub grid: Option<String>,
    /// Horizon in days, overriding the scenario's.
    #[arg(long, global = true, env = "SEIR_PHASE_HORIZON")]
    pub horizon: Option<u32>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "SEIR_PHASE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one policy and write its daily trajectory.
    Simulate(PlanArgs),
    /// Search the grid for the optimal policy.
    Optimize(OptimizeArgs),
    /// Optimal GDP loss and infected count across trade-off weights.
    Tradeoff(AlphaArgs),
    /// Optimal lockdown start and duration across weights and relief factors.
    Sweep(SweepArgs),
    /// Re-optimize for several natural reproduction numbers.
    Sensitivity(SensitivityArgs),
    /// Bias of the optimum under a noisy estimate of R0.
    Uncertainty(UncertaintyArgs),
    /// Vary the adjustment level on the French policy.
    Adjust(AdjustArgs),
    /// Compare a simulated policy against reported active cases.
    Validate(ValidateArgs),
    /// Compute the economic conversion factor from a GDP loss estimate.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// `french`, or `tau0,tau1,tau2,r1,r2,r3`.
    #[arg(long, default_value = "french")]
    pub plan: String,
    /// Adjustment-phase level for the French plan.
    #[arg(long)]
    pub r3: Option<f64>,
    /// First day of the adjustment phase for the French plan.
    #[arg(long)]
    pub adjust_start: Option<u32>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also write the optimal policy's trajectory.
    #[arg(long)]
    pub trajectory: bool,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// Explicit comma-separated weights; overrides the log-spaced range.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long, default_value_t = 1e-7)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 10)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub alphas: AlphaArgs,
    /// `mu1,mu2` pairs separated by `;`.
    #[arg(long, default_value = "1,1;1.41,1.3")]
    pub mu: String,
    /// Minimum lockdown duration; rebuilds the lockdown axis of the grid.
    #[arg(long)]
    pub t_min: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long, default_value = "2,3.5")]
    pub r0: String,
}

#[derive(Debug, Args)]
pub struct UncertaintyArgs {
    #[arg(long, default_value = "0,0.25,0.5,1")]
    pub sigmas: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub r_max: f64,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    /// Comma-separated adjustment levels; defaults to 0.4 up to R0 by 0.1.
    #[arg(long)]
    pub r3: Option<String>,
    #[arg(long, default_value_t = FRENCH_ADJUSTMENT_START)]
    pub adjust_start: u32,
    /// Also run the largest level keeping the drifted R(t) below this bound.
    #[arg(long)]
    pub r_limit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// CSV with a header and columns `date,active_cases`.
    #[arg(long)]
    pub reported: PathBuf,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long)]
    pub window_start: Option<NaiveDate>,
    #[arg(long)]
    pub window_end: Option<NaiveDate>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub delta_gdp: Option<f64>,
    #[arg(long)]
    pub r1_ref: Option<f64>,
    #[arg(long)]
    pub tau1_ref: Option<f64>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let arguments = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, arguments) {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::InfeasibleGrid {
                least_violating: Some(least),
                ..
            } = &e
            {
                let (plan, eval) = least.as_ref();
                eprintln!("least violating candidate: {plan:?} (peak ICU load {:.0})", eval.peak_icu);
            }
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, arguments: Vec<String>) -> Result<PathBuf> {
    let g = &cli.global;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    pool.install(|| {
        let t_min = match &cli.command {
            Command::Sweep(a) => a.t_min,
            _ => None,
        };
        let scenario = resolve_scenario(g, t_min)?;
        let seed = matches!(cli.command, Command::Uncertainty(_)).then_some(g.seed);
        let mut manifest = RunManifest::start(command_name(&cli.command), arguments, &scenario, seed);
        dispatch(&cli.command, &scenario, g, &mut manifest)?;
        manifest.finish(&g.out)
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Optimize(_) => "optimize",
        Command::Tradeoff(_) => "tradeoff",
        Command::Sweep(_) => "sweep",
        Command::Sensitivity(_) => "sensitivity",
        Command::Uncertainty(_) => "uncertainty",
        Command::Adjust(_) => "adjust",
        Command::Validate(_) => "validate",
        Command::Calibrate(_) => "calibrate",
    }
}

/// Preset or file, then horizon and grid overrides.
pub fn resolve_scenario(g: &Global, t_min: Option<u32>) -> Result<Scenario> {
    let mut scenario = match preset(&g.scenario) {
        Some(s) => s,
        None => {
            let path = Path::new(&g.scenario);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{:?} is neither a preset ({}) nor an existing file",
                    g.scenario,
                    PRESET_NAMES.join(", ")
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            load_scenario(&text)?
        }
    };
    if let Some(h) = g.horizon {
        scenario.horizon = h;
    }
    if let Some(t) = t_min {
        scenario.cost.t_min = t;
    }
    scenario.grid = match g.grid.as_deref() {
        Some("coarse") => GridPreset::Coarse.build(scenario.cost.t_min),
        Some("full") => GridPreset::Full.build(scenario.cost.t_min),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            load_grid(&text, scenario.cost.t_min)?
        }
        None if t_min.is_some() => GridSpec {
            tau1_values: GridPreset::Coarse.build(scenario.cost.t_min).tau1_values,
            ..scenario.grid
        },
        None => scenario.grid,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Usage(format!("{what}: {s:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Usage(format!("empty list of {what}")));
    }
    Ok(values)
}

fn alphas(a: &AlphaArgs) -> Result<Vec<f64>> {
    if let Some(list) = &a.alphas {
        return parse_list(list, "alpha values");
    }
    if a.points == 0 {
        return Err(Error::Usage("--points must be >= 1".into()));
    }
    if !(a.alpha_min > 0.0 && a.alpha_min <= a.alpha_max) {
        return Err(Error::Usage("need 0 < --alpha-min <= --alpha-max".into()));
    }
    Ok(log_space(a.alpha_min, a.alpha_max, a.points))
}

/// `n` points evenly spaced in log scale from `lo` to `hi`, both included.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
        })
        .collect()
}

fn mu_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    let pairs: Vec<(f64, f64)> = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| match parse_list(p, "mu values")?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::Usage(format!("{p:?} is not a mu1,mu2 pair"))),
        })
        .collect::<Result<_>>()?;
    if pairs.is_empty() {
        return Err(Error::Usage("empty list of (mu1, mu2) pairs".into()));
    }
    Ok(pairs)
}

fn plan_from(args: &PlanArgs, scenario: &Scenario) -> Result<PolicyPlan> {
    let horizon = scenario.horizon;
    let plan = if args.plan == "french" {
        match (args.adjust_start, args.r3) {
            (None, None) => french_policy_plan(horizon),
            (start, r3) => french_policy_with_adjustment(
                horizon,
                start.unwrap_or(FRENCH_ADJUSTMENT_START),
                r3.unwrap_or(scenario.params.r0),
            )?,
        }
    } else {
        let parts: Vec<&str> = args.plan.split(',').map(str::trim).collect();
        let [t0, t1, t2, r1, r2, r3] = parts.as_slice() else {
            return Err(Error::Usage(format!(
                "--plan {:?}: expected `french` or tau0,tau1,tau2,r1,r2,r3",
                args.plan
            )));
        };
        let day = |s: &str| s.parse::<u32>().map_err(|_| Error::Usage(format!("{s:?} is not a day count")));
        let level = |s: &str| s.parse::<f64>().map_err(|_| Error::Usage(format!("{s:?} is not a number")));
        PolicyPlan {
            tau0: day(t0)?,
            tau1: day(t1)?,
            tau2: day(t2)?,
            r1: level(r1)?,
            r2: level(r2)?,
            r3: level(r3)?,
            horizon,
        }
    };
    plan.validate()?;
    Ok(plan)
}

/// Fails when every point of a sweep failed, returning the first error.
fn require_success<I, T>(rows: Vec<SweepRow<I, T>>) -> Result<Vec<SweepRow<I, T>>> {
    if rows.iter().any(|r| r.outcome.is_ok()) {
        return Ok(rows);
    }
    let mut rows = rows;
    match rows.swap_remove(0).outcome {
        Err(e) => Err(e),
        Ok(_) => unreachable!("no successful point"),
    }
}

fn dispatch(cmd: &Command, sc: &Scenario, g: &Global, m: &mut RunManifest) -> Result<()> {
    let out = &g.out;
    match cmd {
        Command::Simulate(a) => {
            let plan = plan_from(a, sc)?;
            let traj = simulate_policy(&sc.params, &plan, &sc.drift, &sc.integrator)?;
            let eval = evaluate_trajectory(&traj, &plan, &sc.params, &sc.cost);
            m.emit(out, "trajectory.csv", &report::trajectory_csv(&traj, sc.cost.sigma_icu))?;
            m.notes.push(format!(
                "plan {plan:?}: economic cost {:.6e}, infected {:.6e}, peak ICU {:.1}, feasible {}",
                eval.economic_cost, eval.infected_total, eval.peak_icu, eval.feasible
            ));
        }
        Command::Optimize(a) => {
            let cost = crate::cost::CostParams {
                alpha: a.alpha.unwrap_or(sc.cost.alpha),
                ..sc.cost
            };
            let result = grid_search(&sc.problem(), &cost)?;
            m.emit(out, "optimum.csv", &report::search_result_csv(&result))?;
            if a.trajectory {
                let traj = simulate_policy(&sc.params, &result.best_plan, &sc.drift, &sc.integrator)?;
                m.emit(out, "optimum_trajectory.csv", &report::trajectory_csv(&traj, sc.cost.sigma_icu))?;
            }
        }
        Command::Tradeoff(a) => {
            let rows = require_success(tradeoff_sweep(&alphas(a)?, &sc.problem(), &sc.cost)?)?;
            m.emit(out, "tradeoff.csv", &report::tradeoff_csv(&rows))?;
        }
        Command::Sweep(a) => {
            let rows = lockdown_feature_sweep(&alphas(&a.alphas)?, &mu_pairs(&a.mu)?, &sc.problem(), &sc.cost)?;
            let rows = require_success(rows)?;
            m.emit(out, "features.csv", &report::feature_sweep_csv(&rows))?;
        }
        Command::Sensitivity(a) => {
            let r0s = parse_list(&a.r0, "R0 values")?;
            let rows = require_success(r0_sensitivity(&r0s, &sc.problem(), &sc.cost, &sc.calibration)?)?;
            m.emit(out, "sensitivity.csv", &report::sensitivity_csv(&rows))?;
        }
        Command::Uncertainty(a) => {
            let spec = UncertaintySpec {
                sigma_levels: parse_list(&a.sigmas, "sigma levels")?,
                n_samples: a.samples,
                seed: g.seed,
                r_min: a.r_min,
                r_max: a.r_max,
            };
            let rep = mc_r0_uncertainty(&spec, &sc.problem(), &sc.cost, &sc.calibration)?;
            m.emit(out, "uncertainty.csv", &report::uncertainty_csv(&rep))?;
        }
        Command::Adjust(a) => {
            let mut levels = match &a.r3 {
                Some(list) => parse_list(list, "R3 values")?,
                None => level_range(0.4, sc.params.r0, 0.1),
            };
            let prefix = french_policy_with_adjustment(sc.horizon, a.adjust_start, sc.params.r0)?;
            if let Some(limit) = a.r_limit {
                let bound = max_r3_below(limit, prefix.adjustment_days(), &sc.params, &sc.drift).ok_or_else(|| {
                    Error::Domain(format!("no adjustment level keeps R(t) below {limit}"))
                })?;
                // strictly below the bound, on the 1e-3 lattice
                let r3 = ((bound * 1e3).ceil() - 1.0) / 1e3;
                m.notes.push(format!("R3 = {r3} keeps R(t) < {limit} (bound {bound})"));
                levels.push(r3);
            }
            let rows = adjustment_sweep(&prefix, &levels, &sc.params, &sc.drift, &sc.cost, &sc.integrator)?;
            m.emit(out, "adjust.csv", &report::adjustment_csv(&rows))?;
            m.emit(out, "adjust_curves.csv", &report::adjustment_curves_csv(&rows, sc.cost.sigma_icu))?;
        }
        Command::Validate(a) => {
            let plan = plan_from(&a.plan, sc)?;
            let reported = ReportedSeries::from_path(&a.reported)?;
            let traj = simulate_policy(&sc.params, &plan, &sc.drift, &sc.integrator)?;
            let window = match (a.window_start, a.window_end) {
                (None, None) => None,
                (Some(s), Some(e)) => Some((s, e)),
                _ => return Err(Error::Usage("--window-start and --window-end go together".into())),
            };
            let cmp = report::compare_reported(&traj, &reported, window)?;
            m.emit(out, "comparison.csv", &report::comparison_csv(&cmp))?;
            let summary = serde_json::to_vec_pretty(&cmp.summary).expect("summary serializes");
            m.emit(out, "comparison_summary.json", &summary)?;
            let s = &cmp.summary;
            println!(
                "{} days in {}..{}: max |residual| {:.0}, mean |residual| {:.0}, mean relative {:.3}",
                s.n_days, s.window_start, s.window_end, s.max_abs, s.mean_abs, s.mean_rel
            );
        }
        Command::Calibrate(a) => {
            let cal = KeCalibration {
                delta_gdp: a.delta_gdp.unwrap_or(sc.calibration.delta_gdp),
                r1_ref: a.r1_ref.unwrap_or(sc.calibration.r1_ref),
                tau1_ref: a.tau1_ref.unwrap_or(sc.calibration.tau1_ref),
            };
            let ke = calibrate_ke(cal.delta_gdp, &sc.params, cal.r1_ref, cal.tau1_ref)?;
            let check = lockdown_term(ke, &sc.params, cal.r1_ref, cal.tau1_ref);
            println!("K_e = {ke:.6e} currency·day (printed reference {PRINTED_KE:.4e})");
            m.emit(
                out,
                "calibration.csv",
                &report::calibration_csv(&[
                    ("delta_gdp", cal.delta_gdp),
                    ("r0", sc.params.r0),
                    ("delta", sc.params.delta),
                    ("r1_ref", cal.r1_ref),
                    ("tau1_ref", cal.tau1_ref),
                    ("ke", ke),
                    ("lockdown_term", check),
                    ("ke_printed_reference", PRINTED_KE),
                ]),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_hits_both_ends() {
        let v = log_space(1e-7, 1e-4, 4);
        assert_eq!(v[0], 1e-7);
        assert_eq!(v[3], 1e-4);
        assert!((v[1] - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn empty_sweeps_are_usage_errors() {
        assert!(matches!(parse_list(" , ", "alpha values"), Err(Error::Usage(_))));
        assert!(matches!(mu_pairs(""), Err(Error::Usage(_))));
        assert!(matches!(mu_pairs("1,1,1"), Err(Error::Usage(_))));
        assert_eq!(mu_pairs("1,1;1.41,1.3").unwrap(), vec![(1.0, 1.0), (1.41, 1.3)]);
    }

    #[test]
    fn bad_flags_exit_with_usage_code() {
        assert_eq!(run(["seir-phase", "simulate", "--bogus"]), 2);
        assert_eq!(run(["seir-phase"]), 2);
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        assert_eq!(run(["seir-phase", "--scenario", "/nonexistent/x.toml", "calibrate"]), 3);
    }

    #[test]
    fn explicit_plans_parse() {
        let sc = crate::scenario::france_preset();
        let args = PlanArgs {
            plan: "3,30,60,0.4,0.9,1.1".into(),
            r3: None,
            adjust_start: None,
        };
        let p = plan_from(&args, &sc).unwrap();
        assert_eq!((p.tau0, p.tau1, p.tau2, p.r3), (3, 30, 60, 1.1));
        let bad = PlanArgs {
            plan: "3,30".into(),
            ..args
        };
        assert!(matches!(plan_from(&bad, &sc), Err(Error::Usage(_))));
    }
}
