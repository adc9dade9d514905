//! Two-step node → anchor → node message passing.
//!
//! With `A` the `N × s` selection matrix of a node-anchor latent graph,
//! `Λ = diag(Aᵀ1)` and `Δ = diag(A1)`:
//!
//! * aggregate: `V = Λ⁻¹ Aᵀ U` (anchor row = mean of the nodes selecting it)
//! * broadcast: `U' = Δ⁻¹ A V` (node row = mean of its selected anchors)
//!
//! Anchors that no node selects have `Λ⁻¹ = 0` and get a zero row.

use ndarray::{Array2, ArrayView2};

use crate::data::CsrMatrix;
use crate::error::{Error, Result};
use crate::learner::{LatentGraph, ProbabilityKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepOperator<T> {
    selection: CsrMatrix<T>,
    inv_lambda: Vec<T>,
    inv_delta: Vec<T>,
}

fn inverse_counts<T: Scalar>(counts: impl Iterator<Item = usize>) -> Vec<T> {
    counts
        .map(|c| {
            if c == 0 {
                T::zero()
            } else {
                T::one() / T::from_usize(c).expect("count")
            }
        })
        .collect()
}

fn scale_rows<T: Scalar>(mut x: Array2<T>, scale: &[T]) -> Array2<T> {
    for (mut row, &s) in x.rows_mut().into_iter().zip(scale) {
        row.mapv_inplace(|v| v * s);
    }
    x
}

impl<T: Scalar> TwoStepOperator<T> {
    pub fn new(a_star: &LatentGraph) -> Result<Self> {
        if a_star.kind() != ProbabilityKind::NodeAnchor {
            return Err(Error::InvalidArgument(
                "two-step message passing needs a node-anchor latent graph".into(),
            ));
        }
        let pattern = a_star.structure();
        let mut col_counts = vec![0usize; pattern.num_cols()];
        for &c in pattern.col_indices() {
            col_counts[c] += 1;
        }
        Ok(Self {
            selection: pattern.to_unit(),
            inv_lambda: inverse_counts(col_counts.into_iter()),
            inv_delta: inverse_counts((0..pattern.num_rows()).map(|r| pattern.degree(r))),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.selection.num_rows()
    }

    pub fn num_anchors(&self) -> usize {
        self.selection.num_cols()
    }

    /// `Λ⁻¹ Aᵀ U`
    pub fn aggregate(&self, u: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if u.nrows() != self.num_nodes() {
            return Err(Error::shape(
                "anchor aggregate",
                self.num_nodes(),
                u.nrows(),
            ));
        }
        Ok(scale_rows(self.selection.t_mul_dense(u)?, &self.inv_lambda))
    }

    /// `Δ⁻¹ A V`
    pub fn broadcast(&self, v: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if v.nrows() != self.num_anchors() {
            return Err(Error::shape(
                "anchor broadcast",
                self.num_anchors(),
                v.nrows(),
            ));
        }
        Ok(scale_rows(self.selection.mul_dense(v)?, &self.inv_delta))
    }

    /// `Δ⁻¹ A Λ⁻¹ Aᵀ U`
    pub fn apply(&self, u: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.broadcast(self.aggregate(u)?.view())
    }

    /// `A Λ⁻¹ Aᵀ Δ⁻¹ G`, the adjoint of [`apply`](Self::apply).
    pub fn apply_transpose(&self, g: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if g.nrows() != self.num_nodes() {
            return Err(Error::shape("anchor adjoint", self.num_nodes(), g.nrows()));
        }
        let scaled = scale_rows(g.to_owned(), &self.inv_delta);
        let to_anchors = scale_rows(self.selection.t_mul_dense(scaled.view())?, &self.inv_lambda);
        self.selection.mul_dense(to_anchors.view())
    }
}

/// Node features to anchor features.
pub fn anchor_aggregate<T: Scalar>(
    u: ArrayView2<'_, T>,
    a_star: &LatentGraph,
) -> Result<Array2<T>> {
    TwoStepOperator::new(a_star)?.aggregate(u)
}

/// Anchor features back to nodes.
pub fn anchor_broadcast<T: Scalar>(
    v: ArrayView2<'_, T>,
    a_star: &LatentGraph,
) -> Result<Array2<T>> {
    TwoStepOperator::new(a_star)?.broadcast(v)
}
