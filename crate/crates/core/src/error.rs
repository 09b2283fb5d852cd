use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock cutoff discards more probability than allowed.
    #[error("truncation error: tail weight {tail:.3e} exceeds {limit:.1e} at cutoff {cutoff}")]
    Truncation { tail: f64, limit: f64, cutoff: usize },

    #[error("two-mode space of {signal}x{idler} exceeds the budget of {budget} amplitudes")]
    TruncationBudget {
        signal: usize,
        idler: usize,
        budget: usize,
    },

    /// `a|0> = 0` cannot be renormalized.
    #[error("annihilation of the vacuum yields the zero vector")]
    ZeroState,

    #[error("heralding probability {0:e} is zero to working precision")]
    ZeroProbability(f64),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("marginal mass {mass:.6} on the sampling grid is below {required}")]
    DegenerateDistribution { mass: f64, required: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    /// Some records have zero probability under the trial state.
    #[error("likelihood is singular at {} record(s), first indices {:?}", .records.len(), first_few(.records))]
    SingularLikelihood { records: Vec<usize> },

    #[error("bootstrap: only {succeeded} of {replicas} replicas succeeded")]
    Bootstrap { succeeded: usize, replicas: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

fn first_few(records: &[usize]) -> &[usize] {
    &records[..records.len().min(8)]
}
