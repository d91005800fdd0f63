use thiserror::Error;

/// Errors raised across the library.
///
/// Variants are grouped so the experiment driver can map them onto exit codes:
/// validation-type failures (domain, configuration, size, precondition) versus
/// solver failures (non-convergence, breakdown).
#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient field violates a structural assumption at a point.
    #[error("domain error: assumption ({assumption}) violated: {detail}")]
    Domain {
        assumption: &'static str,
        detail: String,
    },

    /// Cholesky factorisation met a non-positive pivot.
    #[error("ellipticity violated: non-positive pivot {pivot:e} at column {column}")]
    Ellipticity { column: usize, pivot: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("grid of {nodes} nodes needs ~{bytes} bytes, above the cap of {cap} bytes")]
    Size {
        nodes: usize,
        bytes: usize,
        cap: usize,
    },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("radial shooting failed: {0}")]
    Shooting(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("contraction failed at eps={eps}, xi={xi:?}: {reason}")]
    Contraction {
        eps: f64,
        xi: Vec<f64>,
        reason: String,
    },

    #[error("Krylov breakdown: {0}")]
    Breakdown(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(assumption: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            assumption,
            detail: detail.into(),
        }
    }

    /// True for failures that stem from invalid user input rather than solver trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Ellipticity { .. }
                | Error::InvalidInput(_)
                | Error::Precondition(_)
                | Error::Size { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
