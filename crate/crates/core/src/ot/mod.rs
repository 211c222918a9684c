//! Exact and entropic optimal transport between two uniformly weighted
//! discrete measures.
//!
//! The exact solver is a primal network simplex specialised to the dense
//! bipartite transport graph; the entropic solver is a log-domain Sinkhorn
//! iteration. Both return a [`TransportPlan`] in sparse triplet form.

mod matrix;
mod network_simplex;
mod plan;
mod sinkhorn;

pub use matrix::DenseMatrix;
pub use network_simplex::{solve_exact, solve_exact_with, PivotRule, SimplexOptions};
pub use plan::{evaluate_plan, PlanEntry, SinkhornDiagnostics, TransportPlan};
pub use sinkhorn::{solve_sinkhorn, SinkhornOptions};

use thiserror::Error;

/// Default cap on the number of cost entries (n·m) a single problem may hold.
pub const DEFAULT_MAX_ENTRIES: usize = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("cost entry ({row}, {col}) is not finite: {value}")]
    NonFiniteCost { row: usize, col: usize, value: f64 },
    #[error("problem has {entries} cost entries, above the cap of {cap}")]
    SizeOverflow { entries: usize, cap: usize },
    #[error("empty support: n = {n}, m = {m}")]
    EmptySupport { n: usize, m: usize },
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("entropic regularization must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("network simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

/// A transport problem between `n` source atoms of mass `1/n` and `m` target
/// atoms of mass `1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOtProblem {
    cost: DenseMatrix,
}

impl DiscreteOtProblem {
    pub fn new(cost: DenseMatrix) -> Result<Self, OtError> {
        Self::with_cap(cost, DEFAULT_MAX_ENTRIES)
    }

    /// Validates the cost matrix against a custom size cap.
    pub fn with_cap(cost: DenseMatrix, max_entries: usize) -> Result<Self, OtError> {
        let (n, m) = cost.shape();
        if n == 0 || m == 0 {
            return Err(OtError::EmptySupport { n, m });
        }
        let entries = n.saturating_mul(m);
        if entries > max_entries {
            return Err(OtError::SizeOverflow {
                entries,
                cap: max_entries,
            });
        }
        if let Some(idx) = cost.as_slice().iter().position(|c| !c.is_finite()) {
            return Err(OtError::NonFiniteCost {
                row: idx / m,
                col: idx % m,
                value: cost.as_slice()[idx],
            });
        }
        Ok(Self { cost })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OtError> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.cost.rows()
    }

    pub fn m(&self) -> usize {
        self.cost.cols()
    }

    pub fn cost(&self) -> &DenseMatrix {
        &self.cost
    }

    pub fn into_cost(self) -> DenseMatrix {
        self.cost
    }
}
