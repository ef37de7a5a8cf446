//! Transportation-cost and norm-entropy inequalities on finite probability
//! spaces.
//!
//! An inequality `α(𝒯(ν)) ≤ H(ν|μ)` pairs a transport-like functional 𝒯
//! (an optimal transport cost, or a dual seminorm such as total variation)
//! with the relative entropy H. This crate builds such inequalities and
//! checks them numerically:
//!
//! - [`measures`]: finite spaces, probability measures, entropy, variation
//!   norms, products and conditionals.
//! - [`transport`]: exact discrete optimal transport (primal plans and
//!   Kantorovich duals), the Kantorovich–Rubinstein Lipschitz dual norm and
//!   derived cost constructions.
//! - [`ratefn`]: the calculus of convex increasing left-continuous rate
//!   functions vanishing at zero — monotone conjugates, inf-convolutions,
//!   convex regularization.
//! - [`duality`]: the Bobkov–Götze dual criterion — log-Laplace transforms
//!   over potential families, Cramér transforms, and brute-force best
//!   transportation functions.
//! - [`criteria`]: integral criteria — Orlicz norms, Bernstein-type bounds,
//!   and the constructors that turn integrability data into rate functions.
//! - [`tensor`]: tensorization of convex inequalities on product spaces.
//! - [`devlab`]: Monte Carlo and exact-enumeration experiments — empirical
//!   measure tails, concentration of measure, empirical processes.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so unrestricted concurrent use is safe. Long sweeps parallelize
//! internally with deterministic merges.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod config;
pub mod criteria;
pub mod devlab;
pub mod duality;
pub mod grid;
pub mod measures;
pub mod ratefn;
pub mod tensor;
pub mod transport;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("metric cost required: {0}")]
    MetricRequired(String),

    #[error("negative entry at index {idx}: {value}")]
    Negative { idx: usize, value: f64 },

    #[error("not a valid rate function: {0}")]
    NotClassC(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
