//! Online learning of piecewise-constant losses with a meta-learned
//! exponential forecaster.
//!
//! The crate is organised bottom-up:
//!
//! * [`piecewise`]: exact algebra on piecewise-constant functions and densities.
//! * [`forecaster`]: the exponential forecaster with exact sampling.
//! * [`meta_init`]: adaptive discretization and the FTRL initializer.
//! * [`meta_step`]: step-size learners (FTL, EWOO) and the full meta loop.
//! * [`tasks`]: exact loss generators for knapsack, clustering and MWIS.
//! * [`robust`]: dispersed attacks, dual regret and halving adversaries.
//! * [`metrics`]: overlap, task similarity, dispersion and regret summaries.
//! * [`cli`]: the experiment harness behind the `dispersed-meta` binary.

pub mod cli;
pub mod error;
pub mod forecaster;
pub mod meta_init;
pub mod meta_step;
pub mod metrics;
pub mod piecewise;
pub mod quad;
pub mod robust;
pub mod rng;
mod simplex;
pub mod tasks;

pub use error::{Error, Result};
pub use forecaster::{ForecasterState, TaskTrace};
pub use piecewise::{Density, Interval, PiecewiseConstant};
