use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model evaluation produced a value that cannot come from a valid
    /// amplitude/spec combination (e.g. a negative coincidence rate).
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// The least-squares design matrix has a (numerically) null direction.
    #[error("degenerate fit basis: {direction} (smallest normalized singular value {smallest_singular_value:.3e})")]
    DegenerateBasis { direction: String, smallest_singular_value: f64, singular_values: Vec<f64> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
