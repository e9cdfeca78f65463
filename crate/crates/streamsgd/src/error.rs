use std::io;

use thiserror::Error;

/// Errors raised by estimators, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |A - A^T| = {asymmetry:e} exceeds {allowed:e}")]
    NotSymmetric { asymmetry: f64, allowed: f64 },
    #[error("Jacobi eigendecomposition did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("singular covariance: eigenvalue {value:e} at position {index} is below the floor {floor:e}")]
    SingularCovariance {
        index: usize,
        value: f64,
        floor: f64,
    },
    #[error("step {t} is before the start {t1} of the decaying schedule")]
    BeforeScheduleStart { t: u64, t1: u64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("arm {arm} is out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("support already contains all {0} coordinates")]
    SupportFull(usize),
    #[error("fit needs at least {needed} logged points in range, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("non-positive error {value:e} at t = {t}; a log-log fit needs positive values")]
    NonPositiveError { t: u64, value: f64 },
    #[error(
        "degenerate limiting variance at index {index}: 2 * C_a' * lambda = {value} must exceed 1"
    )]
    DegenerateVariance { index: usize, value: f64 },
    #[error("conic margin is undefined for a zero covariate")]
    ZeroCovariate,
    #[error("no exploitation pulls recorded for arm {0}")]
    NoExploitSamples(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
