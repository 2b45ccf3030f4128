//! Support estimation for compressively sensed sparse signals.
//!
//! The crate bundles three things that are usually scattered across separate
//! toolboxes:
//!
//! * compact convolutional support estimator networks ([`model`]) trained from
//!   scratch on proxy reconstructions,
//! * the classical sparse solvers they are measured against ([`solvers`]:
//!   OMP, FISTA-Lasso, weighted Lasso, regularized least squares),
//! * an experiment [`harness`] that senses a dataset, trains the estimators
//!   and emits deterministic CSV/JSON reports.
//!
//! Everything runs on the CPU in 64-bit floats. All randomness flows through
//! explicitly seeded, counter-based generators (see [`rng`]) so repeated runs
//! of an experiment are byte-identical.

pub mod dictclass;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sensing;
pub mod solvers;

pub use error::{Error, Result};
pub use numerics::Matrix;

/// Crate version recorded in emitted reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
