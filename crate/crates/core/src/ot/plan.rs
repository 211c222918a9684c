use std::io::{self, Write};

use super::{DenseMatrix, OtError};

/// One nonzero cell of a coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// Convergence report attached to plans produced by the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornDiagnostics {
    pub epsilon: f64,
    pub iterations: usize,
    /// L1 deviation of the row and column sums from their targets.
    pub marginal_error: f64,
    pub converged: bool,
}

/// A coupling between `n` source atoms and `m` target atoms with uniform
/// marginals, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<PlanEntry>,
    /// `Σ mass(i,j)·cost(i,j)` for the cost the plan was solved against.
    pub objective: f64,
    /// `None` for exact solutions.
    pub approximation: Option<SinkhornDiagnostics>,
}

impl TransportPlan {
    pub fn is_exact(&self) -> bool {
        self.approximation.is_none()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.entries.iter().filter(|e| e.mass > 0.0).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for e in &self.entries {
            sums[e.i] += e.mass;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for e in &self.entries {
            sums[e.j] += e.mass;
        }
        sums
    }

    /// `Σ mass(i,j)·value(i,j)` for a value given as a function of the cell.
    pub fn evaluate_with(&self, mut value: impl FnMut(usize, usize) -> f64) -> f64 {
        self.entries.iter().map(|e| e.mass * value(e.i, e.j)).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.m);
        for e in &self.entries {
            out.set(e.i, e.j, out.get(e.i, e.j) + e.mass);
        }
        out
    }

    /// Debug dump as `i,j,mass` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "i,j,mass")?;
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.i, e.j, e.mass)?;
        }
        Ok(())
    }
}

/// Evaluates `Σ π(i,j)·value(i,j)` for a matrix that may differ from the one
/// the plan was solved against.
pub fn evaluate_plan(plan: &TransportPlan, value: &DenseMatrix) -> Result<f64, OtError> {
    if value.shape() != (plan.n, plan.m) {
        return Err(OtError::DimensionMismatch {
            expected: (plan.n, plan.m),
            found: value.shape(),
        });
    }
    Ok(plan.evaluate_with(|i, j| value.get(i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_plan() -> TransportPlan {
        TransportPlan {
            n: 2,
            m: 2,
            entries: vec![
                PlanEntry { i: 0, j: 0, mass: 0.5 },
                PlanEntry { i: 1, j: 1, mass: 0.5 },
            ],
            objective: 0.0,
            approximation: None,
        }
    }

    #[test]
    fn single_cell() {
        let plan = TransportPlan {
            n: 1,
            m: 1,
            entries: vec![PlanEntry { i: 0, j: 0, mass: 1.0 }],
            objective: 0.0,
            approximation: None,
        };
        let v = DenseMatrix::from_rows(&[vec![7.5]]).unwrap();
        assert_eq!(evaluate_plan(&plan, &v).unwrap(), 7.5);
    }

    #[test]
    fn diagonal_plan_value() {
        let v = DenseMatrix::from_rows(&[vec![2.0, 9.0], vec![9.0, 4.0]]).unwrap();
        assert_eq!(evaluate_plan(&diag_plan(), &v).unwrap(), 3.0);
    }

    #[test]
    fn shape_mismatch() {
        let v = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            evaluate_plan(&diag_plan(), &v),
            Err(OtError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        diag_plan().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,mass\n0,0,0.5\n1,1,0.5\n");
    }
}
