use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument is outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("objective undefined: {0}")]
    UndefinedObjective(String),

    #[error("infeasible coalition: |S| = {size} < M = {capacity} would force attempt probabilities above 1")]
    InfeasibleCoalition { size: usize, capacity: usize },

    #[error("C(N, K) = {count} coalitions exceeds the enumeration limit {limit}; use greedy_coalition")]
    EnumerationLimit { count: u128, limit: u128 },

    #[error("exact Shapley values need N <= {limit} (got N = {players}); use sampled mode")]
    ShapleyLimit { players: usize, limit: usize },

    #[error("infeasible schedule: {0}")]
    Infeasible(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
