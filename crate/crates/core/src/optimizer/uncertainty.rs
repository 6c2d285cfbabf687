//! Robustness of the optimal lockdown to a misestimated `R0`.
//!
//! The optimizer is fed `R̂0 = R0 + Δ` with `Δ ~ N(0, σ²)` truncated to
//! `[R_min − R0, R_max − R0]`, and the optimal `τ0` and `R1` are compared
//! with those obtained from the true `R0`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostParams, KeCalibration};
use crate::error::{Error, Result};

use super::sweeps::optimize_at_r0;
use super::SearchProblem;

/// Rejection draws allowed before giving up on a truncation interval.
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub sigma_levels: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub sigma_levels: Vec<f64>,
    /// `E|τ̂0 − τ0|` (days) per level.
    pub bias_tau0: Vec<f64>,
    /// `E|R̂1 − R1|` per level.
    pub bias_r1: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub baseline_tau0: u32,
    pub baseline_r1: f64,
}

/// Draws from `N(0, σ²)` conditioned on `[lo, hi]` by rejection.
pub fn truncated_normal<R: rand::Rng + ?Sized>(rng: &mut R, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= 0.0 && 0.0 <= hi) || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "truncation interval [{lo}, {hi}] with sigma {sigma} is not usable"
        )));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    for _ in 0..MAX_REJECTIONS {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Err(Error::Domain(format!(
        "rejection sampler found no draw in [{lo}, {hi}] with sigma {sigma}"
    )))
}

/// Each `(level, sample)` pair gets its own ChaCha stream of the master seed,
/// so draws do not depend on evaluation order.
fn sample_rng(seed: u64, level: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | sample as u64);
    rng
}

pub fn mc_r0_uncertainty(
    spec: &UncertaintySpec,
    problem: &SearchProblem<'_>,
    cost: &CostParams,
    calibration: &KeCalibration,
) -> Result<UncertaintyReport> {
    let r0 = problem.params.r0;
    if !(spec.r_min < r0 && r0 < spec.r_max) {
        return Err(Error::Domain(format!(
            "R0 = {r0} must lie strictly inside [{}, {}]",
            spec.r_min, spec.r_max
        )));
    }
    if spec.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be >= 1"));
    }
    if spec.sigma_levels.is_empty() {
        return Err(Error::Usage("empty list of sigma levels".into()));
    }
    let (lo, hi) = (spec.r_min - r0, spec.r_max - r0);

    let mut draws = Vec::with_capacity(spec.sigma_levels.len());
    for (level, &sigma) in spec.sigma_levels.iter().enumerate() {
        let row = (0..spec.n_samples)
            .map(|k| truncated_normal(&mut sample_rng(spec.seed, level, k), sigma, lo, hi))
            .collect::<Result<Vec<f64>>>()?;
        draws.push(row);
    }

    // every distinct perturbed R0 is optimized once
    let mut unique: BTreeMap<u64, f64> = BTreeMap::new();
    unique.insert(r0.to_bits(), r0);
    for row in &draws {
        for d in row {
            let r = r0 + d;
            unique.insert(r.to_bits(), r);
        }
    }
    let solved: BTreeMap<u64, (u32, f64)> = unique
        .into_par_iter()
        .map(|(bits, r)| {
            optimize_at_r0(r, problem, cost, calibration)
                .map(|res| (bits, (res.best_plan.tau0, res.best_plan.r1)))
        })
        .collect::<Result<_>>()?;

    let (tau0_star, r1_star) = solved[&r0.to_bits()];
    let mut bias_tau0 = Vec::with_capacity(draws.len());
    let mut bias_r1 = Vec::with_capacity(draws.len());
    for row in &draws {
        let (mut sum_tau0, mut sum_r1) = (0.0, 0.0);
        for d in row {
            let (tau0, r1) = solved[&(r0 + d).to_bits()];
            sum_tau0 += (tau0 as f64 - tau0_star as f64).abs();
            sum_r1 += (r1 - r1_star).abs();
        }
        bias_tau0.push(sum_tau0 / row.len() as f64);
        bias_r1.push(sum_r1 / row.len() as f64);
    }

    Ok(UncertaintyReport {
        sigma_levels: spec.sigma_levels.clone(),
        bias_tau0,
        bias_r1,
        n_samples: spec.n_samples,
        seed: spec.seed,
        baseline_tau0: tau0_star,
        baseline_r1: r1_star,
    })
}
