use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PvbsError {
    #[error("lattice dimension {0} outside supported range 1..=4")]
    InvalidDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("volume is not connected")]
    Disconnected,

    #[error("inner volume is not contained in the ambient volume")]
    NotSubset,

    #[error("configuration is not in sector (N_a={n_a}, N_b={n_b})")]
    NotInSector { n_a: usize, n_b: usize },

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: u128, cap: u128 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("parameters are gapless; operation requires gapped parameters")]
    Gapless,

    #[error("parameters too close to gapless manifold: {0}")]
    TiltMargin(String),

    #[error("certificate infeasible at this margin: no admissible ell up to cap {0}")]
    EllCap(usize),

    #[error("lemma hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("floating-point overflow: {0}; use log-space quantities for this volume")]
    Overflow(String),
}

impl PvbsError {
    /// True for failures caused by resource caps or iterative solvers rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            PvbsError::DimensionCap { .. } | PvbsError::NoConvergence { .. } | PvbsError::EllCap(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, PvbsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PvbsError::InvalidArgument(msg.into()))
}
