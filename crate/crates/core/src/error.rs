use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular channel: Gram condition number {condition:.3e} exceeds {limit:.1e}")]
    SingularChannel { condition: f64, limit: f64 },

    #[error("numerical degeneracy: {singular} singular draws over {trials} trials")]
    NumericalDegeneracy { singular: usize, trials: usize },

    #[error("subproblem infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (best objective {best_objective:.6e})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best_positions: Box<Vec<Vec<crate::scenario::Point>>>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
