//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scenario loading, simulation, and the processing pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// Scenario file could not be read or parsed.
    #[error("scenario parse error: {0}")]
    Parse(String),

    /// A scenario invariant is violated; the message names the offending field.
    #[error("scenario validation error: {0}")]
    Validation(String),

    /// An argument violates an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Requested time lies outside the trajectory span.
    #[error("time {t} s outside trajectory span [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// Nonlinear least-squares solve failed to converge or hit degenerate geometry.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
