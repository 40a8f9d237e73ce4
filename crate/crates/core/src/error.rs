use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Numeric failures carry the name of the module that raised them so the
/// CLI can report where a computation went out of its domain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: shape mismatch: {detail}")]
    Shape { module: &'static str, detail: String },

    #[error("{module}: matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { module: &'static str, asymmetry: f64 },

    #[error("{module}: {what} did not converge after {iterations} iterations")]
    NoConvergence {
        module: &'static str,
        what: &'static str,
        iterations: usize,
    },

    #[error("{module}: domain error: {detail}")]
    Domain { module: &'static str, detail: String },

    #[error("{module}: non-finite value: {detail}")]
    NonFinite { module: &'static str, detail: String },

    #[error("{module}: invalid argument: {detail}")]
    InvalidArgument { module: &'static str, detail: String },

    #[error("regression: design not full rank (smallest/largest eigenvalue of Sigma = {ratio:e})")]
    SingularDesign { ratio: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(module: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn non_finite(module: &'static str, detail: impl Into<String>) -> Self {
        Error::NonFinite {
            module,
            detail: detail.into(),
        }
    }

    /// Short machine-readable error kind used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Domain { .. } => "domain",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::SingularDesign { .. } => "singular_design",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// Module that raised the error, when known.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Shape { module, .. }
            | Error::NotSymmetric { module, .. }
            | Error::NoConvergence { module, .. }
            | Error::Domain { module, .. }
            | Error::NonFinite { module, .. }
            | Error::InvalidArgument { module, .. } => module,
            Error::SingularDesign { .. } => "regression",
            Error::Config(_) | Error::Json(_) => "cli",
            Error::Io { .. } => "io",
        }
    }
}
