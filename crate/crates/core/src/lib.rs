//! Rothe-method solver for the one-dimensional fractional p-Laplacian
//! evolution problem `u_t + (-Δ)_p^s u = f` on a bounded interval with zero
//! exterior condition, plus computable checks of the renormalized and entropy
//! solution properties.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kernel;
pub mod ladder;
pub mod mesh;
pub mod operator;
pub mod source;
pub mod stepper;
pub mod truncation;

#[cfg(feature = "cli")]
pub mod cli;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use kernel::{assemble, Kappa, KernelWeights};
pub use mesh::{Domain, Grid, GridFunction, Norm, TimeGrid, Trajectory};
pub use operator::NonlocalOperator;
pub use source::SourceSpec;
