//! Q-error confidence bounds for cardinality estimation by random uniform
//! sampling.
//!
//! The crate evaluates lower bounds on `P(Q-error <= q)` for a sample of `k`
//! rows drawn with or without replacement from a table of `n` rows, `C` of
//! which satisfy a predicate. Alongside the bounds it provides:
//!
//! - [`exact`]: the exact probability by binomial / hypergeometric tail
//!   summation, used as ground truth for every bound;
//! - [`montecarlo`]: a seeded, reproducible simulation of the sampling process;
//! - [`solver`]: inversion of the bounds into sample-size and accuracy plans;
//! - [`reports`]: the golden confidence table and plot-ready data series;
//! - [`ingest`]: CSV tables, a small conjunctive predicate language, and
//!   bound-annotated sample estimates.

// `!(x >= a)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod exact;
pub mod ingest;
pub mod model;
pub mod montecarlo;
pub mod reports;
pub mod solver;

pub use bounds::{BoundQuery, BoundResult, BoundTerm, InequalityKind, InequalitySet, Side};
pub use error::{Error, Result};
pub use model::{
    population_variance, q_error, selectivity, PopulationSpec, QError, SampleDesign, SamplingMethod,
};

/// Crate version, recorded in machine-readable output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
