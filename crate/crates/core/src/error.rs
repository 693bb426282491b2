use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice: basis vectors are linearly dependent (det = {det:e})")]
    DegenerateLattice { det: f64 },

    #[error("invalid resolution {got}: {reason}")]
    Resolution { got: usize, reason: String },

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("potential is not real: coefficient at {index:?} violates hermitian symmetry by {defect:e}")]
    NonHermitianPotential { index: [i64; 2], defect: f64 },

    #[error("eigensolver failed to converge at xi = {xi:?}")]
    NonConvergence { xi: [f64; 2] },

    #[error("near degeneracy of band {band} at xi = {xi:?}: gap {gap:e} <= {gap_tol:e}")]
    NearDegeneracy {
        band: usize,
        xi: [f64; 2],
        gap: f64,
        gap_tol: f64,
    },

    #[error(
        "transport step too large at xi = {xi:?}: projected norm {norm:.3e} < 1/2; refine the grid"
    )]
    TransportStepTooLarge { xi: [f64; 2], norm: f64 },

    #[error("mollifier width too large at xi = {xi:?}: projected norm {norm:.3e} < 1/2")]
    MollifierTooWide { xi: [f64; 2], norm: f64 },

    #[error("empty trial family: no eigenvalue below lambda_max = {lambda_max}")]
    EmptyFamily { lambda_max: f64 },

    #[error(
        "trial family loses rank at xi = {xi:?} (min Gram eigenvalue {min_eig:e}); add reference points or raise lambda_max"
    )]
    Coverage { xi: [f64; 2], min_eig: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("near-singular system: condition number {cond:e} exceeds {limit:e}")]
    NearSingular { cond: f64, limit: f64 },

    #[error("unsupported gauge: {0}")]
    UnsupportedGauge(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("operator is not positive definite: minimum eigenvalue {min_eig:e}")]
    Indefinite { min_eig: f64 },

    #[error("flux must be an exact rational p/q: {0}")]
    IrrationalFlux(String),

    #[error("inconsistent symbol: hermitian defect {defect:e} exceeds {limit:e}")]
    InconsistentSymbol { defect: f64, limit: f64 },

    #[error("too few points: {0}")]
    TooFewPoints(String),

    #[error("Hausdorff distance undefined: both sets are empty")]
    UndefinedDistance,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
