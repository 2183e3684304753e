//! Binary-response panel models with heterogeneous slopes and interactive
//! fixed effects.
//!
//! The model is `P(y_it = 1) = G(x_itᵀβ_i + γ_iᵀf_t)` for a known link `G`.
//! [`estimator::fit`] maximizes the likelihood by alternating over units and
//! periods, [`selector`] picks the number of factors with an information
//! criterion, and [`inference`] provides sandwich covariances, the
//! mean-group estimator, half-panel jackknife bias correction and average
//! partial effects. [`simulation`] and [`portfolio`] drive the estimator in
//! Monte Carlo experiments and a rolling-window portfolio backtest.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimator;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod link;
pub mod portfolio;
pub mod rng;
pub mod selector;
pub mod simulation;
pub mod types;

pub use error::{Error, Result};
pub use estimator::{fit, FitConfig, FitResult, NewtonConfig};
pub use likelihood::{HessianKind, Objective};
pub use link::LinkFamily;
pub use selector::{select_num_factors, SelectionResult};
pub use types::{IndexBounds, LinearIndex, PanelData, ParameterSet};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
