//! Calibrated scenarios and the scenario config file.
//!
//! A config file is TOML. Every key is optional; anything left out is taken
//! from the base preset (`base = "france"` unless stated). Example:
//!
//! ```toml
//! version = 1
//! base = "france"
//! label = "france, uniform economic losses"
//! horizon = 300
//!
//! [epidemic]
//! r0 = 3.5
//! initial_exposed = 1.33e5   # persons; or `exposed0` as a fraction
//!
//! [drift]
//! a1 = 0.001
//!
//! [cost]
//! alpha = 1e-4
//! mu1 = 1.0
//! mu2 = 1.0
//! # ke = 7.379e9           # omit to calibrate from [calibration]
//!
//! [calibration]
//! delta_gdp = 120e9
//! r1_ref = 0.6
//! tau1_ref = 55
//!
//! [grid]
//! preset = "coarse"          # or "full"
//! tau2 = { start = 1, end = 120, step = 10 }
//! r3 = [0.6, 0.9, 1.2]
//!
//! [integrator]
//! substeps_per_day = 20
//! method = "rk4"             # or "adaptive" with abs_tol / rel_tol
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{CostParams, KeCalibration};
use crate::error::{Error, Result};
use crate::model::{DriftModel, EpidemicParams, IntegratorConfig, Method, PolicyPlan};
use crate::optimizer::{day_range, level_range, GridSpec, SearchProblem};

pub const SCHEMA_VERSION: u32 = 1;

/// Day 0 of the France calendar.
pub const DAY_ZERO: (i32, u32, u32) = (2020, 3, 1);

/// Lockdown start in France (March 17 counted from day 0 = March 1).
pub const FRENCH_TAU0: u32 = 17;
pub const FRENCH_TAU1: u32 = 55;
pub const FRENCH_R1: f64 = 0.6;
pub const FRENCH_R2: f64 = 0.9;
/// September 30, when the French adjustment phase started.
pub const FRENCH_ADJUSTMENT_START: u32 = 213;
/// Value of `K_e` printed for France, kept for reference; scenarios use the
/// calibrated value.
pub const PRINTED_KE: f64 = 7.379e9;

/// Which grid to use when the scenario does not spell one out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Coarse,
    Full,
}

impl GridPreset {
    pub fn build(self, t_min: u32) -> GridSpec {
        match self {
            GridPreset::Coarse => GridSpec::coarse(t_min),
            GridPreset::Full => GridSpec::full(t_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub horizon: u32,
    pub params: EpidemicParams,
    pub drift: DriftModel,
    pub cost: CostParams,
    pub calibration: KeCalibration,
    pub grid: GridSpec,
    pub integrator: IntegratorConfig,
    /// How each non-default or derived value was obtained.
    pub resolution: Vec<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1 day"));
        }
        self.params.validate()?;
        self.drift.validate()?;
        self.drift.check_horizon(self.horizon)?;
        self.cost.validate()?;
        self.integrator.validate()?;
        self.grid.validate(self.horizon)
    }

    pub fn problem(&self) -> SearchProblem<'_> {
        SearchProblem {
            grid: &self.grid,
            params: &self.params,
            drift: &self.drift,
            integrator: &self.integrator,
            horizon: self.horizon,
        }
    }

    /// Same scenario over another horizon.
    pub fn with_horizon(&self, horizon: u32) -> Result<Self> {
        let s = Self {
            horizon,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    /// Serializes every resolved value; loading the output yields `self`
    /// (up to the resolution notes).
    pub fn to_toml(&self) -> String {
        let doc = ScenarioDoc {
            version: Some(SCHEMA_VERSION),
            base: None,
            label: Some(self.label.clone()),
            horizon: Some(self.horizon),
            epidemic: Some(EpidemicDoc {
                r0: Some(self.params.r0),
                delta: Some(self.params.delta),
                gamma: Some(self.params.gamma),
                population: Some(self.params.population),
                exposed0: Some(self.params.exposed0),
                initial_exposed: None,
            }),
            drift: Some(DriftDoc {
                a1: Some(self.drift.a1),
                a2: Some(self.drift.a2),
                a3: Some(self.drift.a3),
            }),
            cost: Some(CostDoc {
                alpha: Some(self.cost.alpha),
                ke: Some(self.cost.ke),
                kh: Some(self.cost.kh),
                mu1: Some(self.cost.mu1),
                mu2: Some(self.cost.mu2),
                sigma_icu: Some(self.cost.sigma_icu),
                icu_capacity: Some(self.cost.icu_capacity),
                t_min: Some(self.cost.t_min),
                r_gap: Some(self.cost.r_gap),
            }),
            calibration: Some(CalibrationDoc {
                delta_gdp: Some(self.calibration.delta_gdp),
                r1_ref: Some(self.calibration.r1_ref),
                tau1_ref: Some(self.calibration.tau1_ref),
            }),
            grid: Some(GridDoc {
                preset: None,
                tau0: Some(DayAxis::List(self.grid.tau0_values.clone())),
                tau1: Some(DayAxis::List(self.grid.tau1_values.clone())),
                tau2: Some(DayAxis::List(self.grid.tau2_values.clone())),
                r1: Some(LevelAxis::List(self.grid.r1_values.clone())),
                r2: Some(LevelAxis::List(self.grid.r2_values.clone())),
                r3: Some(LevelAxis::List(self.grid.r3_values.clone())),
            }),
            integrator: Some(IntegratorDoc {
                substeps_per_day: Some(self.integrator.substeps_per_day),
                method: Some(match self.integrator.method {
                    Method::Rk4 => MethodName::Rk4,
                    Method::Adaptive { .. } => MethodName::Adaptive,
                }),
                abs_tol: match self.integrator.method {
                    Method::Adaptive { abs_tol, .. } => Some(abs_tol),
                    Method::Rk4 => None,
                },
                rel_tol: match self.integrator.method {
                    Method::Adaptive { rel_tol, .. } => Some(rel_tol),
                    Method::Rk4 => None,
                },
            }),
        };
        toml::to_string(&doc).expect("scenario documents always serialize")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// The France calibration over 300 days (March 1 to December 26).
pub fn france_preset() -> Scenario {
    let params = EpidemicParams {
        r0: 3.5,
        delta: 0.1857,
        gamma: 0.16,
        population: 66e6,
        exposed0: 1.33e5 / 66e6,
    };
    let calibration = KeCalibration {
        delta_gdp: 120e9,
        r1_ref: FRENCH_R1,
        tau1_ref: FRENCH_TAU1 as f64,
    };
    let ke = calibration
        .ke(&params)
        .expect("France calibration inputs are valid");
    let t_min = 30;
    Scenario {
        label: "france".into(),
        horizon: 300,
        params,
        drift: DriftModel {
            a1: 0.001,
            a2: 0.002,
            a3: 0.002,
        },
        cost: CostParams {
            alpha: 1e-4,
            ke,
            kh: params.population,
            mu1: 1.41,
            mu2: 1.3,
            sigma_icu: 0.015,
            icu_capacity: 15e3,
            t_min,
            r_gap: 0.2,
        },
        calibration,
        grid: GridSpec::coarse(t_min),
        integrator: IntegratorConfig::default(),
        resolution: Vec::new(),
    }
}

/// France over 210 days (March 1 to September 27), used for trade-off curves.
pub fn france_tradeoff_preset() -> Scenario {
    Scenario {
        label: "france-tradeoff".into(),
        horizon: 210,
        ..france_preset()
    }
}

pub const PRESET_NAMES: [&str; 2] = ["france", "france-tradeoff"];

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "france" => Some(france_preset()),
        "france-tradeoff" => Some(france_tradeoff_preset()),
        _ => None,
    }
}

/// The policy applied in France: lockdown from day 17 for 55 days at
/// `R1 = 0.6`, then `R2 = 0.9` until the end of the horizon.
pub fn french_policy_plan(horizon: u32) -> PolicyPlan {
    let end_of_lockdown = FRENCH_TAU0 + FRENCH_TAU1;
    PolicyPlan {
        tau0: FRENCH_TAU0,
        tau1: FRENCH_TAU1,
        tau2: horizon.saturating_sub(end_of_lockdown),
        r1: FRENCH_R1,
        r2: FRENCH_R2,
        r3: FRENCH_R2,
        horizon,
    }
}

/// The French policy with an adjustment phase at level `r3` starting on
/// `adjustment_start`.
pub fn french_policy_with_adjustment(horizon: u32, adjustment_start: u32, r3: f64) -> Result<PolicyPlan> {
    let end_of_lockdown = FRENCH_TAU0 + FRENCH_TAU1;
    if adjustment_start < end_of_lockdown || adjustment_start > horizon {
        return Err(Error::Domain(format!(
            "adjustment start {adjustment_start} must lie in [{end_of_lockdown}, {horizon}]"
        )));
    }
    let plan = PolicyPlan {
        tau2: adjustment_start - end_of_lockdown,
        r3,
        ..french_policy_plan(horizon)
    };
    plan.validate()?;
    Ok(plan)
}

fn take(notes: &mut Vec<String>, field: &str, value: Option<f64>, default: f64) -> f64 {
    match value {
        Some(v) => {
            notes.push(format!("{field} = {v} (config)"));
            v
        }
        None => default,
    }
}

// ---- config document ----

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epidemic: Option<EpidemicDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<DriftDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<CostDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    integrator: Option<IntegratorDoc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpidemicDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    population: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exposed0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_exposed: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a3: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ke: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_icu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    icu_capacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_gap: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_gdp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r1_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau1_ref: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum DayAxis {
    List(Vec<u32>),
    Range { start: u32, end: u32, step: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LevelAxis {
    List(Vec<f64>),
    Range { start: f64, end: f64, step: f64 },
}

impl DayAxis {
    fn resolve(&self, field: &str) -> Result<Vec<u32>> {
        match *self {
            DayAxis::List(ref v) => Ok(v.clone()),
            DayAxis::Range { start, end, step } => {
                if step == 0 || end < start {
                    return Err(Error::invalid(
                        field,
                        format!("range {start}..={end} step {step} is empty or has zero step"),
                    ));
                }
                Ok(day_range(start, end, step))
            }
        }
    }
}

impl LevelAxis {
    fn resolve(&self, field: &str) -> Result<Vec<f64>> {
        match *self {
            LevelAxis::List(ref v) => Ok(v.clone()),
            LevelAxis::Range { start, end, step } => {
                if !(step > 0.0) || end < start {
                    return Err(Error::invalid(
                        field,
                        format!("range {start}..={end} step {step} is empty or has zero step"),
                    ));
                }
                Ok(level_range(start, end, step))
            }
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<GridPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau0: Option<DayAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau1: Option<DayAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau2: Option<DayAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r1: Option<LevelAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r2: Option<LevelAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r3: Option<LevelAxis>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MethodName {
    Rk4,
    Adaptive,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    substeps_per_day: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<MethodName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
}

impl GridDoc {
    fn apply(&self, mut grid: GridSpec) -> Result<GridSpec> {
        if let Some(a) = &self.tau0 {
            grid.tau0_values = a.resolve("grid.tau0")?;
        }
        if let Some(a) = &self.tau1 {
            grid.tau1_values = a.resolve("grid.tau1")?;
        }
        if let Some(a) = &self.tau2 {
            grid.tau2_values = a.resolve("grid.tau2")?;
        }
        if let Some(a) = &self.r1 {
            grid.r1_values = a.resolve("grid.r1")?;
        }
        if let Some(a) = &self.r2 {
            grid.r2_values = a.resolve("grid.r2")?;
        }
        if let Some(a) = &self.r3 {
            grid.r3_values = a.resolve("grid.r3")?;
        }
        Ok(grid)
    }
}

/// Parses a stand-alone grid document, laid out like the `[grid]` section
/// of a scenario but at top level. Axes left out come from the coarse grid.
pub fn load_grid(document: &str, t_min: u32) -> Result<GridSpec> {
    let doc: GridDoc = toml::from_str(document).map_err(|e| Error::Config(e.to_string()))?;
    let base = doc.preset.unwrap_or(GridPreset::Coarse).build(t_min);
    doc.apply(base)
}

/// Parses a scenario document, filling gaps from its base preset.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(document).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(v) = doc.version {
        if v != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {v} (expected {SCHEMA_VERSION})"
            )));
        }
    }
    let base_name = doc.base.as_deref().unwrap_or("france");
    let base = preset(base_name).ok_or_else(|| {
        Error::Config(format!(
            "unknown base preset {base_name:?} (known: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    let mut notes = vec![format!("base preset: {base_name}")];

    let e = doc.epidemic.unwrap_or_default();
    let population = take(&mut notes, "epidemic.population", e.population, base.params.population);
    let exposed_default = match e.initial_exposed {
        Some(persons) => persons / population,
        None => base.params.exposed0,
    };
    if e.exposed0.is_some() && e.initial_exposed.is_some() {
        return Err(Error::Config(
            "epidemic.exposed0 and epidemic.initial_exposed are mutually exclusive".into(),
        ));
    }
    let params = EpidemicParams {
        r0: take(&mut notes, "epidemic.r0", e.r0, base.params.r0),
        delta: take(&mut notes, "epidemic.delta", e.delta, base.params.delta),
        gamma: take(&mut notes, "epidemic.gamma", e.gamma, base.params.gamma),
        population,
        exposed0: take(&mut notes, "epidemic.exposed0", e.exposed0, exposed_default),
    };

    let d = doc.drift.unwrap_or_default();
    let drift = DriftModel {
        a1: take(&mut notes, "drift.a1", d.a1, base.drift.a1),
        a2: take(&mut notes, "drift.a2", d.a2, base.drift.a2),
        a3: take(&mut notes, "drift.a3", d.a3, base.drift.a3),
    };

    let k = doc.calibration.unwrap_or_default();
    let calibration = KeCalibration {
        delta_gdp: take(&mut notes, "calibration.delta_gdp", k.delta_gdp, base.calibration.delta_gdp),
        r1_ref: take(&mut notes, "calibration.r1_ref", k.r1_ref, base.calibration.r1_ref),
        tau1_ref: take(&mut notes, "calibration.tau1_ref", k.tau1_ref, base.calibration.tau1_ref),
    };

    let c = doc.cost.unwrap_or_default();
    let ke = match c.ke {
        Some(v) => {
            notes.push(format!("cost.ke = {v} (config)"));
            v
        }
        None => {
            params.validate()?;
            let v = calibration.ke(&params)?;
            notes.push(format!("cost.ke = {v} (calibrated)"));
            v
        }
    };
    let kh = match c.kh {
        Some(v) => {
            notes.push(format!("cost.kh = {v} (config)"));
            v
        }
        None => population,
    };
    let t_min = c.t_min.unwrap_or(base.cost.t_min);
    let cost = CostParams {
        alpha: take(&mut notes, "cost.alpha", c.alpha, base.cost.alpha),
        ke,
        kh,
        mu1: take(&mut notes, "cost.mu1", c.mu1, base.cost.mu1),
        mu2: take(&mut notes, "cost.mu2", c.mu2, base.cost.mu2),
        sigma_icu: take(&mut notes, "cost.sigma_icu", c.sigma_icu, base.cost.sigma_icu),
        icu_capacity: take(&mut notes, "cost.icu_capacity", c.icu_capacity, base.cost.icu_capacity),
        t_min,
        r_gap: take(&mut notes, "cost.r_gap", c.r_gap, base.cost.r_gap),
    };

    let g = doc.grid.unwrap_or_default();
    let base_grid = match g.preset {
        Some(p) => p.build(t_min),
        None if c.t_min.is_some() => GridPreset::Coarse.build(t_min),
        None => base.grid.clone(),
    };
    let grid = g.apply(base_grid)?;

    let i = doc.integrator.unwrap_or_default();
    let substeps_per_day = i.substeps_per_day.unwrap_or(base.integrator.substeps_per_day);
    let method = match i.method {
        None if i.abs_tol.is_none() && i.rel_tol.is_none() => base.integrator.method,
        Some(MethodName::Rk4) | None => {
            if i.abs_tol.is_some() || i.rel_tol.is_some() {
                return Err(Error::Config(
                    "integrator.abs_tol / rel_tol only apply to method = \"adaptive\"".into(),
                ));
            }
            Method::Rk4
        }
        Some(MethodName::Adaptive) => Method::Adaptive {
            abs_tol: i.abs_tol.unwrap_or(1e-12),
            rel_tol: i.rel_tol.unwrap_or(1e-9),
        },
    };

    let scenario = Scenario {
        label: doc.label.unwrap_or(base.label),
        horizon: doc.horizon.unwrap_or(base.horizon),
        params,
        drift,
        cost,
        calibration,
        grid,
        integrator: IntegratorConfig {
            substeps_per_day,
            method,
        },
        resolution: notes,
    };
    scenario.validate()?;
    Ok(scenario)
}
