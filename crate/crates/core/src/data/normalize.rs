use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::sparse::{CsrMatrix, SparseAdjacency};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D⁻¹A`
    RowStochastic,
    /// `D^{-1/2} A D^{-1/2}`
    Symmetric,
}

/// A degree-normalized adjacency used as a linear propagation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedOperator<T> {
    matrix: CsrMatrix<T>,
    normalization: Normalization,
    self_loops: bool,
}

impl<T: Scalar> NormalizedOperator<T> {
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn dim(&self) -> usize {
        self.matrix.num_rows()
    }

    pub fn apply(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.matrix.mul_dense(x)
    }

    pub fn apply_transpose(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.matrix.t_mul_dense(x)
    }

    pub fn to_dense(&self) -> Array2<T> {
        self.matrix.to_dense()
    }
}

/// Normalizes a square 0/1 adjacency by its degrees. With `self_loops` the
/// diagonal is set to 1 before degrees are taken.
pub fn degree_normalize<T: Scalar>(
    a: &SparseAdjacency,
    normalization: Normalization,
    self_loops: bool,
) -> Result<NormalizedOperator<T>> {
    if !a.is_square() {
        return Err(Error::shape(
            "degree_normalize (square)",
            a.num_rows(),
            a.num_cols(),
        ));
    }
    let pattern = if self_loops {
        a.with_self_loops()?
    } else {
        a.clone()
    };
    let degrees: Vec<T> = (0..pattern.num_rows())
        .map(|r| T::from_usize(pattern.degree(r)).expect("degree"))
        .collect();

    let mut values = Vec::with_capacity(pattern.nnz());
    match normalization {
        Normalization::RowStochastic => {
            for (r, d) in degrees.iter().enumerate() {
                if pattern.degree(r) == 0 {
                    return Err(Error::IsolatedNode { node: r });
                }
                let w = T::one() / *d;
                values.extend(std::iter::repeat_n(w, pattern.degree(r)));
            }
        }
        Normalization::Symmetric => {
            let inv_sqrt: Vec<T> = degrees
                .iter()
                .map(|&d| {
                    if d > T::zero() {
                        T::one() / d.sqrt()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            for (r, c) in pattern.iter() {
                values.push(inv_sqrt[r] * inv_sqrt[c]);
            }
        }
    }
    Ok(NormalizedOperator {
        matrix: pattern.with_values(values)?,
        normalization,
        self_loops,
    })
}

/// Propagation operator for a GCN over a (possibly directed) sampled graph:
/// union with transpose, self-loops, symmetric normalization.
pub fn gcn_operator<T: Scalar>(a: &SparseAdjacency) -> Result<NormalizedOperator<T>> {
    degree_normalize(&a.symmetrized()?, Normalization::Symmetric, true)
}
