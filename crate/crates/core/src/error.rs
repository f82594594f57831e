use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cutoff too large: dimension {dim} exceeds ceiling {ceiling}")]
    CutoffTooLarge { dim: usize, ceiling: usize },

    #[error("cutoff not converged: {0}")]
    CutoffNotConverged(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown operator kind `{0}`")]
    UnknownOperator(String),

    #[error("matrix is not Hermitian (max |H - H^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate ground state (gap {gap:e})")]
    DegenerateGround { gap: f64 },

    #[error("excitation jump of {0} between neighbouring grid points")]
    NonUnitJump(f64),

    #[error("perturbative sum not converged: tail contribution {0:e}")]
    TailNotConverged(f64),

    #[error("no positive critical hopping root")]
    NoPositiveRoot,

    #[error("mean-field minimum on the search-box edge (psi_max {psi_max}, n_max {n_max})")]
    BoundaryHit {
        psi_max: f64,
        n_max: usize,
        psi1: f64,
        psi2: f64,
    },

    #[error("phase label is {0} at both ends of the bracket")]
    SamePhase(&'static str),

    #[error("lobe pair check failed: {0}")]
    LobePair(String),

    #[error("selection rule violated (residual {0:e})")]
    SelectionRule(f64),

    #[error("root finder failed: {0}")]
    RootFinder(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::UnknownOperator(_) | Error::Config(_) => {
                ErrorKind::Config
            }
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::CutoffTooLarge { .. } => "cutoff_too_large",
            Error::CutoffNotConverged(_) => "cutoff_not_converged",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::UnknownOperator(_) => "unknown_operator",
            Error::NotHermitian(_) => "not_hermitian",
            Error::NoConvergence(_) => "no_convergence",
            Error::DegenerateGround { .. } => "degenerate_ground",
            Error::NonUnitJump(_) => "non_unit_jump",
            Error::TailNotConverged(_) => "tail_not_converged",
            Error::NoPositiveRoot => "no_positive_root",
            Error::BoundaryHit { .. } => "boundary_hit",
            Error::SamePhase(_) => "same_phase",
            Error::LobePair(_) => "lobe_pair",
            Error::SelectionRule(_) => "selection_rule",
            Error::RootFinder(_) => "root_finder",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
