//! SEIR dynamics with a switched, drifting transmission rate.
//!
//! A policy splits the horizon `[0, T]` into four half-open phases:
//!
//! | phase | interval                              | target R |
//! |-------|---------------------------------------|----------|
//! | 0     | `[0, τ0)`                             | `R0`     |
//! | 1     | `[τ0, τ0+τ1)`                         | `R1`     |
//! | 2     | `[τ0+τ1, τ0+τ1+τ2)`                   | `R2`     |
//! | 3     | `[τ0+τ1+τ2, T]`                       | `R3`     |
//!
//! Within phase `k ≥ 1` the control `u = δ (R0 − Rk)` is constant but its
//! effect is attenuated by `a(t) = 1 − a_k (t − start_k)`, so the effective
//! reproduction number `R(t) = R0 − (R0 − Rk) a(t)` starts at `Rk` and drifts
//! linearly back toward `R0`.
//!
//! Integration runs phase by phase on a daily grid so that no step straddles
//! a discontinuity of the transmission rate.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undershoot below zero that is attributed to rounding and clamped away.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Biological and demographic constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicParams {
    /// Natural reproduction number.
    pub r0: f64,
    /// Removal rate (1/day).
    pub delta: f64,
    /// Incubation-exit rate (1/day).
    pub gamma: f64,
    /// Population size (persons).
    pub population: f64,
    /// Exposed fraction at day 0.
    pub exposed0: f64,
}

impl EpidemicParams {
    pub fn new(r0: f64, delta: f64, gamma: f64, population: f64, exposed0: f64) -> Result<Self> {
        let params = Self {
            r0,
            delta,
            gamma,
            population,
            exposed0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        positive("r0", self.r0)?;
        positive("delta", self.delta)?;
        positive("gamma", self.gamma)?;
        positive("population", self.population)?;
        if !(self.exposed0 >= 0.0 && self.exposed0 < 1.0) {
            return Err(Error::invalid(
                "exposed0",
                format!("must lie in [0, 1), got {}", self.exposed0),
            ));
        }
        Ok(())
    }

    /// `s = 1 − e0`, `e = e0`, `i = r = 0`.
    pub fn initial_state(&self) -> SeirState {
        SeirState([1.0 - self.exposed0, self.exposed0, 0.0, 0.0])
    }

    /// Natural transmission rate `R0·δ`.
    pub fn natural_beta(&self) -> f64 {
        self.r0 * self.delta
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

/// The six decision variables of a four-phase policy plus the horizon.
///
/// `tau1` and `tau2` are durations, not absolute switching times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyPlan {
    /// Day the lockdown starts (duration of the free phase).
    pub tau0: u32,
    /// Lockdown duration (days).
    pub tau1: u32,
    /// Post-lockdown duration (days).
    pub tau2: u32,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// Analysis horizon `T` (days).
    pub horizon: u32,
}

impl PolicyPlan {
    pub fn validate(&self) -> Result<()> {
        let end = self.tau0 as u64 + self.tau1 as u64 + self.tau2 as u64;
        if end > self.horizon as u64 {
            return Err(Error::invalid(
                "plan",
                format!(
                    "tau0 + tau1 + tau2 = {end} exceeds the horizon {}",
                    self.horizon
                ),
            ));
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2), ("r3", self.r3)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {r}")));
            }
        }
        Ok(())
    }

    /// Start day of each phase: `[0, τ0, τ0+τ1, τ0+τ1+τ2]`.
    pub fn phase_starts(&self) -> [u32; 4] {
        let t1 = self.tau0 + self.tau1;
        [0, self.tau0, t1, t1 + self.tau2]
    }

    /// Length of the adjustment phase, `T − (τ0+τ1+τ2)`.
    pub fn adjustment_days(&self) -> u32 {
        self.horizon - self.phase_starts()[3]
    }

    /// Target reproduction number of a phase; phase 0 is uncontrolled.
    pub fn target(&self, phase: Phase, r0: f64) -> f64 {
        match phase {
            Phase::Free => r0,
            Phase::Lockdown => self.r1,
            Phase::PostLockdown => self.r2,
            Phase::Adjustment => self.r3,
        }
    }

    /// Lexicographic order on `(τ0, τ1, τ2, R1, R2, R3)`, used to break ties
    /// between equally good candidates.
    pub fn tie_break_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tau0, self.tau1, self.tau2)
            .cmp(&(other.tau0, other.tau1, other.tau2))
            .then(self.r1.total_cmp(&other.r1))
            .then(self.r2.total_cmp(&other.r2))
            .then(self.r3.total_cmp(&other.r3))
    }
}

/// Per-phase attenuation slopes (1/day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DriftModel {
    pub const NONE: DriftModel = DriftModel {
        a1: 0.0,
        a2: 0.0,
        a3: 0.0,
    };

    /// Builds a drift model that keeps `a(t) ≥ 0` over any phase fitting in
    /// `horizon` days.
    pub fn new(a1: f64, a2: f64, a3: f64, horizon: u32) -> Result<Self> {
        let drift = Self { a1, a2, a3 };
        drift.validate()?;
        drift.check_horizon(horizon)?;
        Ok(drift)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("a1", self.a1), ("a2", self.a2), ("a3", self.a3)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {a}")));
            }
        }
        Ok(())
    }

    /// A phase can last the whole horizon, so `a_k·T ≤ 1` is required.
    pub fn check_horizon(&self, horizon: u32) -> Result<()> {
        for (k, a) in self.slopes().iter().enumerate() {
            if a * horizon as f64 > 1.0 {
                return Err(Error::ModelValidity(format!(
                    "attenuation slope a{} = {a}/day turns negative within a {horizon}-day horizon \
                     (needs a{} <= {:.6})",
                    k + 1,
                    k + 1,
                    1.0 / horizon as f64
                )));
            }
        }
        Ok(())
    }

    pub fn slopes(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn slope(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Free => 0.0,
            Phase::Lockdown => self.a1,
            Phase::PostLockdown => self.a2,
            Phase::Adjustment => self.a3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Free,
    Lockdown,
    PostLockdown,
    Adjustment,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Free,
        Phase::Lockdown,
        Phase::PostLockdown,
        Phase::Adjustment,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Phase active at time `t`; phases are half-open `[start, next_start)`.
pub fn phase_index(t: f64, plan: &PolicyPlan) -> Result<Phase> {
    check_time(t, plan)?;
    let [_, t1, t2, t3] = plan.phase_starts().map(f64::from);
    Ok(if t < t1 {
        Phase::Free
    } else if t < t2 {
        Phase::Lockdown
    } else if t < t3 {
        Phase::PostLockdown
    } else {
        Phase::Adjustment
    })
}

fn check_time(t: f64, plan: &PolicyPlan) -> Result<()> {
    if t >= 0.0 && t <= plan.horizon as f64 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "t = {t} outside [0, {}]",
            plan.horizon
        )))
    }
}

/// Attenuation factor `a(t)`: 1 in phase 0 and at every phase start.
pub fn attenuation_at(t: f64, plan: &PolicyPlan, drift: &DriftModel) -> Result<f64> {
    let phase = phase_index(t, plan)?;
    let start = plan.phase_starts()[phase.index()] as f64;
    let a = 1.0 - drift.slope(phase) * (t - start);
    if a < 0.0 {
        return Err(Error::ModelValidity(format!(
            "attenuation {a} < 0 at t = {t}"
        )));
    }
    Ok(a)
}

/// Control action `u(t) = δ (R0 − Rk)` (1/day), zero before the lockdown.
pub fn control_at(t: f64, plan: &PolicyPlan, params: &EpidemicParams) -> Result<f64> {
    let phase = phase_index(t, plan)?;
    Ok(params.delta * (params.r0 - plan.target(phase, params.r0)))
}

/// Transmission rate `β(t) = R0·δ − u(t)·a(t)`.
pub fn transmission_at(
    t: f64,
    plan: &PolicyPlan,
    drift: &DriftModel,
    params: &EpidemicParams,
) -> Result<f64> {
    let beta = params.natural_beta() - control_at(t, plan, params)? * attenuation_at(t, plan, drift)?;
    if beta < 0.0 {
        return Err(Error::ModelValidity(format!(
            "negative transmission rate {beta} at t = {t}"
        )));
    }
    Ok(beta)
}

/// Effective reproduction number `R(t) = β(t)/δ`.
///
/// Evaluated as `Rk + (R0 − Rk)·a_k·(t − start_k)`, which is the same
/// quantity written so that `R(start_k) = Rk` holds exactly.
pub fn effective_r(
    t: f64,
    plan: &PolicyPlan,
    drift: &DriftModel,
    params: &EpidemicParams,
) -> Result<f64> {
    let phase = phase_index(t, plan)?;
    // surfaces the model-validity error for negative attenuation
    attenuation_at(t, plan, drift)?;
    Ok(Segment::of(phase, plan, drift, params).reproduction(t))
}

/// Integration method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Classical fixed-step 4th-order Runge–Kutta.
    Rk4,
    /// Dormand–Prince 5(4) with step-size control, restarted each day.
    Adaptive { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Fixed steps per day for RK4; initial step guess for the adaptive method.
    pub substeps_per_day: u32,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            substeps_per_day: 4,
            method: Method::Rk4,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(substeps_per_day: u32) -> Self {
        Self {
            substeps_per_day,
            method: Method::Rk4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps_per_day == 0 {
            return Err(Error::invalid("substeps_per_day", "must be >= 1"));
        }
        if let Method::Adaptive { abs_tol, rel_tol } = self.method {
            if !(abs_tol > 0.0 && rel_tol > 0.0) {
                return Err(Error::invalid(
                    "method",
                    format!("adaptive tolerances must be > 0, got abs {abs_tol}, rel {rel_tol}"),
                ));
            }
        }
        Ok(())
    }
}

/// `(s, e, i, r)` population fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeirState(pub [f64; 4]);

impl SeirState {
    pub fn s(&self) -> f64 {
        self.0[0]
    }
    pub fn e(&self) -> f64 {
        self.0[1]
    }
    pub fn i(&self) -> f64 {
        self.0[2]
    }
    pub fn r(&self) -> f64 {
        self.0[3]
    }
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Clamps rounding-level undershoot to zero; rejects anything worse.
    fn sanitize(mut self, t: f64) -> Result<Self> {
        for (x, name) in self.0.iter_mut().zip(["s", "e", "i", "r"]) {
            if !x.is_finite() {
                return Err(Error::Numeric {
                    time: t,
                    reason: format!("{name} is not finite"),
                });
            }
            if *x < 0.0 {
                if *x < -CLAMP_TOLERANCE {
                    return Err(Error::Numeric {
                        time: t,
                        reason: format!("{name} = {x} below zero"),
                    });
                }
                *x = 0.0;
            }
        }
        Ok(self)
    }
}

/// One phase of a plan with everything needed to evaluate `β(t)` inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub phase: Phase,
    pub start: u32,
    pub end: u32,
    pub target: f64,
    pub slope: f64,
    pub r0: f64,
}

impl Segment {
    pub fn of(phase: Phase, plan: &PolicyPlan, drift: &DriftModel, params: &EpidemicParams) -> Self {
        let starts = plan.phase_starts();
        let end = match phase {
            Phase::Adjustment => plan.horizon,
            p => starts[p.index() + 1],
        };
        Self::new(
            phase,
            starts[phase.index()],
            end,
            plan.target(phase, params.r0),
            drift.slope(phase),
            params.r0,
        )
    }

    pub fn new(phase: Phase, start: u32, end: u32, target: f64, slope: f64, r0: f64) -> Self {
        Self {
            phase,
            start,
            end,
            target,
            slope,
            r0,
        }
    }

    #[inline]
    pub fn reproduction(&self, t: f64) -> f64 {
        self.target + (self.r0 - self.target) * self.slope * (t - self.start as f64)
    }
}

#[inline]
fn rhs(y: &[f64; 4], beta: f64, gamma: f64, delta: f64) -> [f64; 4] {
    let infection = beta * y[2] * y[0];
    let incubation = gamma * y[1];
    let removal = delta * y[2];
    [
        -infection,
        infection - incubation,
        incubation - removal,
        removal,
    ]
}

#[inline]
fn axpy(y: &[f64; 4], h: f64, k: &[f64; 4]) -> [f64; 4] {
    [
        y[0] + h * k[0],
        y[1] + h * k[1],
        y[2] + h * k[2],
        y[3] + h * k[3],
    ]
}

/// Integrates the ODE over a single phase, one day at a time.
///
/// The state must be the one at `seg.start`; `visit` receives `(day, state)`
/// for every day `seg.start + 1 ..= seg.end` and may stop the run early.
/// Returns the last state reached and whether the visitor stopped early.
///
/// Both the full simulation and the memoized search go through this routine,
/// so a prefix computed once and continued reproduces a fresh run bit for bit.
pub(crate) fn integrate_segment<F>(
    mut state: SeirState,
    seg: &Segment,
    params: &EpidemicParams,
    cfg: &IntegratorConfig,
    mut visit: F,
) -> Result<(SeirState, bool)>
where
    F: FnMut(u32, &SeirState) -> ControlFlow<()>,
{
    for day in seg.start..seg.end {
        state = step_day(state, day, seg, params, cfg)?;
        if visit(day + 1, &state).is_break() {
            return Ok((state, true));
        }
    }
    Ok((state, false))
}

fn step_day(
    state: SeirState,
    day: u32,
    seg: &Segment,
    params: &EpidemicParams,
    cfg: &IntegratorConfig,
) -> Result<SeirState> {
    let t0 = day as f64;
    let y = match cfg.method {
        Method::Rk4 => rk4_day(state.0, t0, seg, params, cfg.substeps_per_day),
        Method::Adaptive { abs_tol, rel_tol } => {
            dopri_day(state.0, t0, seg, params, cfg.substeps_per_day, abs_tol, rel_tol)?
        }
    };
    SeirState(y).sanitize(t0 + 1.0)
}

fn rk4_day(mut y: [f64; 4], t0: f64, seg: &Segment, params: &EpidemicParams, n: u32) -> [f64; 4] {
    let (gamma, delta) = (params.gamma, params.delta);
    let h = 1.0 / n as f64;
    let beta = |t: f64| delta * seg.reproduction(t);
    for j in 0..n {
        let t = t0 + j as f64 * h;
        let b_mid = beta(t + 0.5 * h);
        let k1 = rhs(&y, beta(t), gamma, delta);
        let k2 = rhs(&axpy(&y, 0.5 * h, &k1), b_mid, gamma, delta);
        let k3 = rhs(&axpy(&y, 0.5 * h, &k2), b_mid, gamma, delta);
        let k4 = rhs(&axpy(&y, h, &k3), beta(t + h), gamma, delta);
        for c in 0..4 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    y
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS_PER_DAY: usize = 100_000;

fn dopri_day(
    mut y: [f64; 4],
    t0: f64,
    seg: &Segment,
    params: &EpidemicParams,
    n: u32,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<[f64; 4]> {
    let (gamma, delta) = (params.gamma, params.delta);
    let t_end = t0 + 1.0;
    let mut t = t0;
    let mut h = 1.0 / n as f64;
    for _ in 0..MAX_STEPS_PER_DAY {
        if t >= t_end {
            return Ok(y);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let mut k = [[0.0; 4]; 7];
        for stage in 0..7 {
            let mut ys = y;
            for (prev, a) in DP_A[stage].iter().enumerate().take(stage) {
                for c in 0..4 {
                    ys[c] += h * a * k[prev][c];
                }
            }
            k[stage] = rhs(&ys, delta * seg.reproduction(t + DP_C[stage] * h), gamma, delta);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for c in 0..4 {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for stage in 0..7 {
                hi += DP_B5[stage] * k[stage][c];
                lo += DP_B4[stage] * k[stage][c];
            }
            y5[c] += h * hi;
            let scale = abs_tol + rel_tol * y[c].abs().max(y5[c].abs());
            err = err.max((h * (hi - lo)).abs() / scale);
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if !h.is_finite() || h < 1e-14 {
            return Err(Error::Numeric {
                time: t,
                reason: "adaptive step size underflow".into(),
            });
        }
    }
    Err(Error::Numeric {
        time: t,
        reason: "adaptive integrator exceeded the step budget".into(),
    })
}

/// Daily samples of a simulated policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub days: Vec<u32>,
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub r_eff: Vec<f64>,
    pub attenuation: Vec<f64>,
    pub phase: Vec<Phase>,
    pub population: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn state(&self, idx: usize) -> SeirState {
        SeirState([self.s[idx], self.e[idx], self.i[idx], self.r[idx]])
    }

    pub fn s_initial(&self) -> f64 {
        self.s[0]
    }

    pub fn s_final(&self) -> f64 {
        *self.s.last().expect("trajectory has at least day 0")
    }

    /// Infected persons `N·i(t)`.
    pub fn infected_persons(&self) -> Vec<f64> {
        self.i.iter().map(|i| i * self.population).collect()
    }

    /// ICU load `σ·N·i(t)` (persons).
    pub fn icu_load(&self, sigma_icu: f64) -> Vec<f64> {
        self.i
            .iter()
            .map(|i| sigma_icu * self.population * i)
            .collect()
    }

    /// Peak of `i(t)` and the day it is reached (first one on ties).
    pub fn peak_infected(&self) -> (u32, f64) {
        self.days
            .iter()
            .zip(&self.i)
            .fold((0, f64::NEG_INFINITY), |best, (&d, &i)| {
                if i > best.1 {
                    (d, i)
                } else {
                    best
                }
            })
    }
}

/// Simulates the SEIR model under `plan` over `[0, T]`, sampled daily.
pub fn simulate_policy(
    params: &EpidemicParams,
    plan: &PolicyPlan,
    drift: &DriftModel,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    params.validate()?;
    plan.validate()?;
    drift.validate()?;
    drift.check_horizon(plan.horizon)?;
    cfg.validate()?;

    let n = plan.horizon as usize + 1;
    let mut traj = Trajectory {
        days: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
        i: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        r_eff: Vec::with_capacity(n),
        attenuation: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        population: params.population,
    };
    let mut push = |day: u32, y: &SeirState| -> Result<()> {
        let t = day as f64;
        let phase = phase_index(t, plan)?;
        let seg = Segment::of(phase, plan, drift, params);
        traj.days.push(day);
        traj.s.push(y.s());
        traj.e.push(y.e());
        traj.i.push(y.i());
        traj.r.push(y.r());
        traj.r_eff.push(seg.reproduction(t));
        traj.attenuation.push(attenuation_at(t, plan, drift)?);
        traj.phase.push(phase);
        Ok(())
    };

    let mut state = params.initial_state();
    push(0, &state)?;
    for phase in Phase::ALL {
        let seg = Segment::of(phase, plan, drift, params);
        if seg.end <= seg.start {
            continue;
        }
        let mut failure = None;
        let (last, _) = integrate_segment(state, &seg, params, cfg, |day, y| match push(day, y) {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        state = last;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn france() -> EpidemicParams {
        EpidemicParams::new(3.5, 0.1857, 0.16, 66e6, 1.33e5 / 66e6).unwrap()
    }

    fn plan(tau0: u32, tau1: u32, tau2: u32, r: [f64; 3], horizon: u32) -> PolicyPlan {
        PolicyPlan {
            tau0,
            tau1,
            tau2,
            r1: r[0],
            r2: r[1],
            r3: r[2],
            horizon,
        }
    }

    #[test]
    fn phase_boundaries_are_half_open() {
        let p = plan(3, 30, 60, [0.4, 0.9, 1.1], 300);
        assert_eq!(phase_index(0.0, &p).unwrap(), Phase::Free);
        assert_eq!(phase_index(2.999, &p).unwrap(), Phase::Free);
        assert_eq!(phase_index(3.0, &p).unwrap(), Phase::Lockdown);
        assert_eq!(phase_index(33.0, &p).unwrap(), Phase::PostLockdown);
        assert_eq!(phase_index(93.0, &p).unwrap(), Phase::Adjustment);
        assert_eq!(phase_index(300.0, &p).unwrap(), Phase::Adjustment);
        assert!(matches!(phase_index(300.5, &p), Err(Error::Domain(_))));
        assert!(matches!(phase_index(-0.1, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn empty_phases_are_skipped_by_the_index() {
        let p = plan(0, 0, 10, [0.4, 0.9, 1.1], 20);
        assert_eq!(phase_index(0.0, &p).unwrap(), Phase::PostLockdown);
        assert_eq!(phase_index(10.0, &p).unwrap(), Phase::Adjustment);
    }

    #[test]
    fn attenuation_resets_and_decays() {
        let p = plan(3, 30, 60, [0.6, 0.9, 1.1], 300);
        let d = DriftModel::new(0.001, 0.002, 0.002, 300).unwrap();
        assert_eq!(attenuation_at(1.0, &p, &d).unwrap(), 1.0);
        assert!((attenuation_at(13.0, &p, &d).unwrap() - 0.99).abs() < 1e-15);
        assert_eq!(attenuation_at(33.0, &p, &d).unwrap(), 1.0);
        assert_eq!(attenuation_at(93.0, &p, &d).unwrap(), 1.0);
    }

    #[test]
    fn negative_attenuation_is_rejected() {
        assert!(matches!(
            DriftModel::new(0.01, 0.0, 0.0, 300),
            Err(Error::ModelValidity(_))
        ));
        assert!(DriftModel::new(-0.1, 0.0, 0.0, 300).is_err());
        // a slope that is fine for the horizon check but evaluated by hand past it
        let p = plan(0, 300, 0, [0.6, 0.9, 1.1], 300);
        let d = DriftModel {
            a1: 0.005,
            a2: 0.0,
            a3: 0.0,
        };
        assert!(matches!(
            attenuation_at(250.0, &p, &d),
            Err(Error::ModelValidity(_))
        ));
    }

    #[test]
    fn control_matches_france_lockdown_arithmetic() {
        let params = france();
        let p = plan(3, 30, 60, [0.6, 0.9, 1.1], 300);
        assert_eq!(control_at(0.0, &p, &params).unwrap(), 0.0);
        assert!((control_at(10.0, &p, &params).unwrap() - 0.53853).abs() < 1e-12);
        let zero = plan(3, 30, 60, [3.5, 3.5, 3.5], 300);
        assert_eq!(control_at(50.0, &zero, &params).unwrap(), 0.0);
    }

    #[test]
    fn transmission_with_drift() {
        let params = france();
        let d = DriftModel::new(0.001, 0.002, 0.002, 300).unwrap();
        let p = plan(3, 30, 60, [0.6, 0.9, 1.1], 300);
        // a(13) = 0.99
        let beta = transmission_at(13.0, &p, &d, &params).unwrap();
        assert!((beta / params.delta - 0.629).abs() < 1e-12);
        assert!((effective_r(13.0, &p, &d, &params).unwrap() - 0.629).abs() < 1e-12);
        assert_eq!(effective_r(3.0, &p, &d, &params).unwrap(), 0.6);

        let free = plan(3, 30, 60, [3.5, 3.5, 3.5], 300);
        for t in [0.0, 5.0, 40.0, 200.0] {
            let b = transmission_at(t, &free, &d, &params).unwrap();
            assert!((b - 3.5 * 0.1857).abs() < 1e-15);
        }
    }

    #[test]
    fn disease_free_equilibrium() {
        let params = EpidemicParams::new(3.5, 0.1857, 0.16, 66e6, 0.0).unwrap();
        let p = plan(5, 30, 30, [0.4, 0.9, 1.2], 120);
        let traj = simulate_policy(&params, &p, &DriftModel::NONE, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(traj.len(), 121);
        assert!(traj.s.iter().all(|&s| s == 1.0));
        assert!(traj.i.iter().all(|&i| i == 0.0));
        assert_eq!(traj.s_final(), traj.s_initial());
    }

    #[test]
    fn trajectory_samples_daily_with_phase_columns() {
        let params = france();
        let d = DriftModel::new(0.001, 0.002, 0.002, 300).unwrap();
        let p = plan(3, 30, 60, [0.4, 0.9, 1.1], 300);
        let traj = simulate_policy(&params, &p, &d, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.days, (0..=300).collect::<Vec<_>>());
        assert_eq!(traj.phase[2], Phase::Free);
        assert_eq!(traj.phase[3], Phase::Lockdown);
        assert_eq!(traj.r_eff[3], 0.4);
        assert_eq!(traj.r_eff[33], 0.9);
        assert_eq!(traj.r_eff[93], 1.1);
        assert_eq!(traj.attenuation[93], 1.0);
        for k in 0..traj.len() {
            assert!((traj.state(k).total() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn adaptive_and_fixed_step_agree() {
        let params = france();
        let d = DriftModel::new(0.001, 0.002, 0.002, 300).unwrap();
        let p = plan(10, 40, 60, [0.5, 0.9, 1.1], 300);
        let fixed = simulate_policy(&params, &p, &d, &IntegratorConfig::default()).unwrap();
        let adaptive = simulate_policy(
            &params,
            &p,
            &d,
            &IntegratorConfig {
                substeps_per_day: 4,
                method: Method::Adaptive {
                    abs_tol: 1e-13,
                    rel_tol: 1e-11,
                },
            },
        )
        .unwrap();
        assert!((fixed.s_final() - adaptive.s_final()).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs_fail_loudly() {
        assert!(EpidemicParams::new(0.0, 0.1, 0.1, 1.0, 0.0).is_err());
        assert!(EpidemicParams::new(1.0, 0.1, 0.1, 1.0, 1.0).is_err());
        assert!(plan(100, 100, 101, [0.4, 0.9, 1.1], 300).validate().is_err());
        assert!(plan(1, 1, 1, [-0.1, 0.9, 1.1], 300).validate().is_err());
        assert!(IntegratorConfig::rk4(0).validate().is_err());
        let bad = IntegratorConfig {
            substeps_per_day: 1,
            method: Method::Adaptive {
                abs_tol: 0.0,
                rel_tol: 1e-6,
            },
        };
        assert!(bad.validate().is_err());
    }
}
