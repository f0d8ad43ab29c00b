use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("grid under-resolves the basis: {0}")]
    UnderResolved(String),
    #[error("not a density operator: {0}")]
    InvalidDensity(String),
    #[error("weights do not balance: source mass {source_mass}, target mass {target_mass}")]
    Unbalanced { source_mass: f64, target_mass: f64 },
    #[error("rank test failed: second eigenvalue {0:e}")]
    NotRankOne(f64),
    #[error("degenerate ground state at z = ({q}, {p}): spectral gap {gap:e}")]
    DegenerateGroundState { q: f64, p: f64, gap: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
