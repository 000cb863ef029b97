use crate::expr::ExprError;

/// Point at which a sampled check failed, as `(coordinate, value)` pairs.
pub type Witness = Vec<(String, f64)>;

pub(crate) fn witness(names: &[String], values: &[f64]) -> Witness {
    names.iter().cloned().zip(values.iter().copied()).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("{source} at {witness:?}")]
    DomainAt { source: ExprError, witness: Witness },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("generator matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("precondition failed: {what} (residual {residual:.3e} at {witness:?})")]
    Precondition {
        what: String,
        residual: f64,
        witness: Witness,
    },
    #[error("no real root on the requested branch at {at}={value} (turning point)")]
    TurningPoint { at: String, value: f64 },
    #[error("branch is not monotone at {at}={value}")]
    BranchAmbiguity { at: String, value: f64 },
    #[error("singular point: {0}")]
    Singular(String),
    #[error("singular Jacobian (|det| = {det:.3e}) at {witness:?}")]
    SingularJacobian { det: f64, witness: Witness },
    #[error(
        "Newton iteration did not converge after {iterations} steps (residual {residual:.3e})"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("variable `{0}` is not cyclic")]
    NotCyclic(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Attaches a point to a bare expression error.
    pub(crate) fn at(e: ExprError, names: &[String], values: &[f64]) -> Error {
        Error::DomainAt {
            source: e,
            witness: witness(names, values),
        }
    }
}
