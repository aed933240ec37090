use thiserror::Error;

/// Errors raised by the curve, matching and animation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is not regular: |c'| = {magnitude:e} at sample {index}")]
    RegularityViolation { index: usize, magnitude: f64 },

    #[error(
        "curves cannot be joined by a geodesic: c0'(θ) = -λ c1'(θ) for some λ > 0 \
         (antipodal derivatives at sample {index}, angle {angle:.9} rad)"
    )]
    NotConnectable { index: usize, angle: f64 },

    #[error("closure projection did not converge after {iterations} iterations (defect {defect:e})")]
    ProjectionDiverged { iterations: usize, defect: f64 },

    #[error("no monotone path from (0,0) to (2π,2π) exists under the slope mask")]
    InfeasibleMask,

    #[error("every admissible warp violates a hard feature bound")]
    InfeasibleHardBounds,

    #[error("Armijo line search failed at iteration {iteration}")]
    LineSearchFailed { iteration: usize },

    #[error("method unavailable: {0}")]
    MethodUnavailable(String),

    #[error("insufficient knee crossings: found {found}, requested {requested}")]
    InsufficientCrossings { found: usize, requested: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported channel `{0}`")]
    UnsupportedChannel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RegularityViolation { .. }
                | Error::NotConnectable { .. }
                | Error::ProjectionDiverged { .. }
                | Error::InfeasibleMask
                | Error::InfeasibleHardBounds
                | Error::LineSearchFailed { .. }
                | Error::MethodUnavailable(_)
                | Error::InsufficientCrossings { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
