//! Union of Intersections (UoI) for sparse model selection and estimation.
//!
//! * [`solvers`]: Lasso, least squares and L1-logistic base learners.
//! * [`resampling`]: seeded bootstrap, half-subsample and 80/10/10 plans.
//! * [`uoi`]: intersection-based selection and union-based bagged estimation.
//! * [`cur`]: leverage-score column subset selection and its UoI variant.
//! * [`metrics`], [`synthetic`], [`experiment`]: evaluation and benchmarks.

pub mod baseline;
pub mod cur;
pub mod data;
pub mod error;
pub mod experiment;
pub mod io;
mod linalg;
pub mod metrics;
pub mod resampling;
pub mod solvers;
pub mod support;
pub mod synthetic;
pub mod uoi;

pub use data::{CoefficientVector, DataSet};
pub use error::{Result, SolveError, UoiError};
pub use resampling::SeedSpec;
pub use solvers::Task;
pub use support::{Support, SupportFamily};
pub use uoi::{run_uoi, ModelEstimate, UoIConfig};
