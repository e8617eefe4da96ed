use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    NonConvergence { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("exact moment mode unsupported: {0}")]
    UnsupportedMode(String),

    #[error("component index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("output is at the origin; relative condition number undefined")]
    OutputAtOrigin,

    /// The input lies on (or numerically at) the ill-posed set where the
    /// condition number is infinite.
    #[error("input is ill-posed ({what}); smallest/largest singular value ratio {ratio:e}")]
    IllPosed { what: &'static str, ratio: f64 },

    #[error("eigenvalue is not simple: gap to nearest eigenvalue {gap:e}")]
    NearMultipleEigenvalue { gap: f64 },

    #[error("numerical rank is ambiguous for rank {rank}: sigma_r/sigma_1 = {lower:e}, sigma_(r+1)/sigma_1 = {upper:e}")]
    AmbiguousRank { rank: usize, lower: f64, upper: f64 },

    #[error("polynomial is degree-deficient: leading coefficient {0:e}")]
    DegreeDeficient(f64),

    #[error("root residual {residual:e} exceeds bound {bound:e}")]
    RootResidual { residual: f64, bound: f64 },

    #[error("root tracking failed: {0}")]
    TrackingFailure(String),

    #[error("root list is empty")]
    EmptyRoots,
}
