//! Four-phase epidemic management on a SEIR model.
//!
//! The crate simulates a SEIR epidemic under a piecewise-constant control
//! whose effect wears off linearly within each phase, prices a policy with a
//! scalarized GDP-loss / infections objective under an ICU capacity
//! constraint, and searches a quantized policy grid exhaustively.
//!
//! ```no_run
//! use seir_phase::{optimizer::grid_search, scenario::france_tradeoff_preset};
//!
//! let scenario = france_tradeoff_preset();
//! let best = grid_search(&scenario.problem(), &scenario.cost).unwrap();
//! println!("{:?} -> {:.3e} infected", best.best_plan, best.best_eval.infected_total);
//! ```

pub mod cli;
pub mod cost;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
