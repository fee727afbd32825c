use thiserror::Error;

/// Errors raised across the analytic, simulation and optimization layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("{func}: argument out of domain ({detail})")]
    Domain { func: &'static str, detail: String },

    /// An iterative routine stopped before reaching its tolerance.
    #[error("{func}: no convergence (estimate {estimate:e}, error bound {error_bound:e})")]
    Convergence {
        func: &'static str,
        estimate: f64,
        error_bound: f64,
    },

    /// A value underflowed or left the range where a result is meaningful.
    #[error("{0}")]
    Range(String),

    /// Scenario parameters violate an invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The configuration document could not be read or was malformed.
    #[error("config: {0}")]
    Config(String),

    /// No allocation satisfies the constraint set.
    #[error("infeasible instance: {}", violated.join(", "))]
    Infeasible { violated: Vec<String> },

    /// The alternating optimizer hit its sweep cap.
    #[error("optimizer did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize, trace: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        func,
        detail: detail.into(),
    }
}
