use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures reported by the numerical routines.
///
/// Variants fall into two groups: invalid input (`InvalidMap`,
/// `InvalidMeasure`, `Precondition`, ...) and numerical outcomes that the
/// caller may want to treat as results rather than crashes (`Undecidable`,
/// `NoRoots`, `NoNearReturn`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rational map: {0}")]
    InvalidMap(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("root finding failed: {0}")]
    RootFindingFailed(String),
    #[error("transport solver failed: {0}")]
    SolverFailed(String),
    #[error("transport problem too large ({rows}x{cols} atoms); coarsen first")]
    TooLarge { rows: usize, cols: usize },
    #[error("certificate undecidable: {0}")]
    Undecidable(String),
    #[error("fewer than 3 tail checkpoints ({0})")]
    InsufficientTail(usize),
    #[error("no near-return below tolerance (best {best:e})")]
    NoNearReturn { best: f64 },
    #[error("newton escaped: closed cycle at distance {distance:e} from the seed orbit")]
    NewtonEscaped { distance: f64 },
    #[error("newton did not converge: {0}")]
    NoConvergence(String),
    #[error("residual too large: {0:e}")]
    ResidualTooLarge(f64),
    #[error("no transition chain found within depth {0}")]
    TransitionNotFound(usize),
    #[error("degenerate family member at lambda = {0}")]
    DegenerateMember(String),
    #[error("continuation failed: {0}")]
    ContinuationFailed(String),
    #[error("no roots found")]
    NoRoots,
    #[error("jacobian singular (condition number {condition:e})")]
    JacobianSingular { condition: f64 },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
}

impl Error {
    /// True for outcomes that are numerically inconclusive rather than failures.
    pub fn is_undecided(&self) -> bool {
        matches!(self, Error::Undecidable(_))
    }

    /// True for errors caused by bad input rather than by a solver.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidMap(_)
                | Error::InvalidMeasure(_)
                | Error::Precondition(_)
                | Error::UnsupportedFormat(_)
                | Error::TooLarge { .. }
        )
    }
}
