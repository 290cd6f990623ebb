use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (shapes, grid, counts).
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// A numerical routine could not deliver its guarantee.
    #[error("internal error: {0}")]
    Internal(String),

    /// Homotopy continuation stalled before the curvature terms were switched on.
    #[error("continuation stalled at t = {t:.6} (step {step:.2e}): {reason}")]
    SolverFailure { t: f64, step: f64, reason: String },

    /// Shooting found no positive solution on an interval of this length.
    #[error("no solution at length {length} after {starts} starts")]
    NoSolutionAtLength { length: f64, starts: usize },

    /// A trajectory left the trust region `|y_i| <= 50` before the endpoint.
    #[error("trajectory blew up at r = {at:.6}")]
    BlowUp { at: f64 },

    /// The final residual report did not pass.
    #[error("residual check failed: {0}")]
    ResidualCheck(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedInput(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
