use thiserror::Error;

/// Errors raised by design construction, evaluation and certification.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The design does not allow estimation of the selected coefficients.
    #[error("infeasible design: {0}")]
    Infeasible(String),
    /// A numerical routine failed to converge or lost accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// The optimizer stopped before reaching its certificate; carries the best iterate.
    #[error("optimizer did not converge: Kiefer-Wolfowitz gap {:.3e} after {} iterations", .0.certificate.gap, .0.certificate.iterations)]
    NotConverged(Box<crate::symmetry::DOptimalResult>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
