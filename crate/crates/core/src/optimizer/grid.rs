use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PolicyPlan;

/// Quantized values of the six decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub tau0_values: Vec<u32>,
    pub tau1_values: Vec<u32>,
    pub tau2_values: Vec<u32>,
    pub r1_values: Vec<f64>,
    pub r2_values: Vec<f64>,
    pub r3_values: Vec<f64>,
}

/// `start, start+step, ...` up to and including `end`.
pub fn day_range(start: u32, end: u32, step: u32) -> Vec<u32> {
    assert!(step > 0, "step must be positive");
    (start..=end).step_by(step as usize).collect()
}

/// Decimal levels `start, start+step, ..., end`, rounded to the nearest
/// representable decimal so that e.g. `0.4 + 3·0.1` prints as `0.7`.
pub fn level_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "step must be positive");
    let n = ((end - start) / step + 1e-9).floor() as i64;
    (0..=n)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

impl GridSpec {
    /// Desk-scale grid: τ0 ∈ {1..30}, τ1 ∈ {T_min, T_min+2, .., 90},
    /// τ2 ∈ {1, 6, .., 116}, each R ∈ {0.4, 0.5, .., 1.5}.
    pub fn coarse(t_min: u32) -> Self {
        let r = level_range(0.4, 1.5, 0.1);
        Self {
            tau0_values: day_range(1, 30, 1),
            tau1_values: day_range(t_min.max(1), 90, 2),
            tau2_values: day_range(1, 120, 5),
            r1_values: r.clone(),
            r2_values: r.clone(),
            r3_values: r,
        }
    }

    /// Daily resolution on every duration.
    pub fn full(t_min: u32) -> Self {
        let r = level_range(0.4, 1.5, 0.1);
        Self {
            tau0_values: day_range(1, 30, 1),
            tau1_values: day_range(t_min.max(1), 90, 1),
            tau2_values: day_range(1, 120, 1),
            r1_values: r.clone(),
            r2_values: r.clone(),
            r3_values: r,
        }
    }

    /// The one-candidate grid containing `plan`.
    pub fn singleton(plan: &PolicyPlan) -> Self {
        Self {
            tau0_values: vec![plan.tau0],
            tau1_values: vec![plan.tau1],
            tau2_values: vec![plan.tau2],
            r1_values: vec![plan.r1],
            r2_values: vec![plan.r2],
            r3_values: vec![plan.r3],
        }
    }

    pub fn validate(&self, horizon: u32) -> Result<()> {
        for (name, values) in [
            ("tau0_values", &self.tau0_values),
            ("tau1_values", &self.tau1_values),
            ("tau2_values", &self.tau2_values),
        ] {
            if values.is_empty() {
                return Err(Error::invalid(name, "must not be empty"));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(name, "must be strictly ascending"));
            }
            if values.iter().any(|&v| v > horizon) {
                return Err(Error::invalid(
                    name,
                    format!("contains a duration beyond the {horizon}-day horizon"),
                ));
            }
        }
        for (name, values) in [
            ("r1_values", &self.r1_values),
            ("r2_values", &self.r2_values),
            ("r3_values", &self.r3_values),
        ] {
            if values.is_empty() {
                return Err(Error::invalid(name, "must not be empty"));
            }
            if values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(name, "must be strictly ascending"));
            }
            if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(name, "values must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Size of the raw Cartesian product.
    pub fn candidate_count(&self) -> u64 {
        [
            self.tau0_values.len(),
            self.tau1_values.len(),
            self.tau2_values.len(),
            self.r1_values.len(),
            self.r2_values.len(),
            self.r3_values.len(),
        ]
        .iter()
        .map(|&n| n as u64)
        .product()
    }

    /// Drops reproduction levels above `r0`, which would need a negative
    /// control action.
    pub fn capped_at(&self, r0: f64) -> Result<Self> {
        let keep = |v: &Vec<f64>| v.iter().copied().filter(|&r| r <= r0).collect::<Vec<_>>();
        let grid = Self {
            r1_values: keep(&self.r1_values),
            r2_values: keep(&self.r2_values),
            r3_values: keep(&self.r3_values),
            ..self.clone()
        };
        if grid.r1_values.is_empty() || grid.r2_values.is_empty() || grid.r3_values.is_empty() {
            return Err(Error::Domain(format!(
                "no grid reproduction level lies below R0 = {r0}"
            )));
        }
        Ok(grid)
    }

    /// Every plan of the Cartesian product, in lexicographic order.
    pub fn plans(&self, horizon: u32) -> impl Iterator<Item = PolicyPlan> + '_ {
        self.tau0_values.iter().flat_map(move |&tau0| {
            self.tau1_values.iter().flat_map(move |&tau1| {
                self.tau2_values.iter().flat_map(move |&tau2| {
                    self.r1_values.iter().flat_map(move |&r1| {
                        self.r2_values.iter().flat_map(move |&r2| {
                            self.r3_values.iter().map(move |&r3| PolicyPlan {
                                tau0,
                                tau1,
                                tau2,
                                r1,
                                r2,
                                r3,
                                horizon,
                            })
                        })
                    })
                })
            })
        })
    }
}
