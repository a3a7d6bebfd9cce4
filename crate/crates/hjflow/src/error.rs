use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interval needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("domain extent must be positive and finite, got {0}")]
    BadExtent(f64),

    #[error("anisotropic spacing: hx = {hx}, hy = {hy}")]
    AnisotropicSpacing { hx: f64, hy: f64 },

    #[error("rectangle corner coordinate {coord} is not on the lattice of pitch {h}")]
    OffLatticeCorner { coord: f64, h: f64 },

    #[error("active cells do not form a single edge-connected component")]
    DisconnectedDomain,

    #[error("domain has no active cells")]
    EmptyDomain,

    #[error("field does not belong to this grid")]
    GridMismatch,

    #[error("non-finite value in field data")]
    NonFiniteField,

    #[error("nonlinearity overflow at node {node}")]
    Overflow { node: usize },

    #[error("iterative solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverStall { iterations: usize, residual: f64 },

    #[error("Robin weight problem requires K > 0, got {0}")]
    RobinIncompatible(f64),

    #[error("auxiliary weight lost positivity (min {0:.3e})")]
    NonPositiveWeight(f64),

    #[error(
        "eigenvalue iteration hit the cap after {iterations} iterations (residual {residual:.3e})"
    )]
    EigenIterationCap { iterations: usize, residual: f64 },

    #[error("fixed-point iteration not contracting after {iterations} iterations (last diff {last_diff:.3e})")]
    NonContraction { iterations: usize, last_diff: f64 },

    #[error("decay fit window holds {found} points, need at least {needed}")]
    FitWindow { found: usize, needed: usize },

    #[error("deviation is below the noise floor everywhere; nothing to fit")]
    BelowNoiseFloor,

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    InvalidParam(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
