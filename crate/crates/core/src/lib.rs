//! Multi-step Richardson-Romberg extrapolation for stochastic approximation.
//!
//! A Robbins-Monro recursion whose innovations come from an Euler scheme
//! with `n` steps converges to a biased root `θ^{*,n}`. Running `R` coupled
//! recursions with steps `T/(rn)` and combining their last iterates with
//! Vandermonde weights cancels the bias up to order `n^{-αR}`.
//!
//! - [`extrapolation`]: level weights and their checks.
//! - [`schedule`]: the gain sequence `γ₀/p^β`.
//! - [`innovation`]: reproducible random streams and coupled Euler paths.
//! - [`model`]: SDE models, the quantile field and analytic oracles.
//! - [`engine`]: crude and Richardson-Romberg SA runs.
//! - [`planner`]: cost model and asymptotically optimal `(n, M)`.
//! - [`harness`]: configuration, repeated experiments and CSV output.

// Guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod extrapolation;
pub mod harness;
pub mod innovation;
pub mod model;
pub mod planner;
pub mod schedule;
pub mod stats;

pub use engine::{
    bias_curve, run_crude, run_rr, run_rr_observed, BiasPoint, ProjectionBox, RrConfig, RunRecord,
    SaConfig,
};
pub use error::{Error, Result};
pub use extrapolation::{
    compute_weights, independent_variance_multiplier, vandermonde_residual, ExtrapolationWeights,
};
pub use innovation::{
    brownian_increments, fine_grid_factor, sample_coupled, CoupledSample, CoupledSampler, Coupling,
    RngStream,
};
pub use model::{
    estimate_density, gbm_quantile, Gbm, QuantileField, SaField, ScalarSde, SdeModel, VectorSde,
};
pub use planner::{
    compare_costs, cost, derive_constants, plan_crude, plan_rr, BudgetPlan, PlannerConstants,
};
pub use schedule::{ScheduleWarning, StepSchedule};
