//! Pairwise Euclidean transfer costs between two embedding sequences.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sequences::{l2_distance, EmbeddingSequence};

/// `n x n̂` matrix with entry `(i, j) = ‖a_i − b_j‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Matrix);

impl CostMatrix {
    /// Wraps an arbitrary nonnegative finite matrix, e.g. for hand-built
    /// test instances.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::ShapeMismatch("cost matrix must be nonempty".into()));
        }
        if values.as_slice().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidValue("costs must be finite and nonnegative".into()));
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("ragged cost rows".into()));
        }
        Self::new(Matrix::from_vec(n, m, rows.concat()))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        let v = self.0.as_slice();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl Deref for CostMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

pub fn cost_matrix(a: &EmbeddingSequence, b: &EmbeddingSequence) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
            line: None,
        });
    }
    Ok(CostMatrix(Matrix::from_fn(a.len(), b.len(), |i, j| {
        l2_distance(a.row(i), b.row(j))
    })))
}
