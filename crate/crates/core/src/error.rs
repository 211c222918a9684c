use thiserror::Error;

use crate::gaussian::OracleError;
use crate::ot::OtError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("penalty weight must be non-negative and finite, got {0}")]
    EtaNegative(f64),
    #[error("invalid eta grid: {0}")]
    InvalidEtaGrid(String),
    #[error("treatment group {0} has no rows")]
    EmptyGroup(u8),
    #[error("treatment group {group} has {size} rows, need at least 2")]
    GroupTooSmall { group: u8, size: usize },
    #[error("outcomes in treatment group {0} have zero variance")]
    ZeroVariance(u8),
    #[error("baseline variance estimate is {0}, expected a positive value")]
    NonPositiveVariance(f64),
    #[error("scalar outcome required, found dimension {0}")]
    NonScalarOutcome(usize),
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
