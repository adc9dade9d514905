//! Compressed sparse row storage.
//!
//! [`SparseAdjacency`] is a 0/1 sparsity pattern (observed graphs, sampled
//! latent graphs); [`CsrMatrix`] attaches real values to a pattern and is
//! what the normalized propagation operators are built from.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseAdjacency {
    num_rows: usize,
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparseAdjacency {
    /// Validates the CSR invariants. Column indices within a row must be
    /// strictly increasing.
    pub fn new(
        num_rows: usize,
        num_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
    ) -> Result<Self> {
        if row_offsets.len() != num_rows + 1 {
            return Err(Error::shape("row_offsets", num_rows + 1, row_offsets.len()));
        }
        if row_offsets[0] != 0 || row_offsets[num_rows] != col_indices.len() {
            return Err(Error::InvalidArgument(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        for r in 0..num_rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "row_offsets decrease at row {r}"
                )));
            }
            let row = &col_indices[lo..hi];
            if let Some(&c) = row.iter().find(|&&c| c >= num_cols) {
                return Err(Error::InvalidArgument(format!(
                    "column {c} out of range in row {r} (num_cols = {num_cols})"
                )));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "row {r} columns not strictly increasing"
                )));
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            row_offsets,
            col_indices,
        })
    }

    pub fn empty(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            row_offsets: vec![0; num_rows + 1],
            col_indices: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
        }
    }

    /// Builds from per-row column lists; columns are sorted and deduplicated.
    pub fn from_rows(num_cols: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Self::new(rows.len(), num_cols, row_offsets, col_indices)
    }

    /// Symmetric, zero-diagonal adjacency from an undirected edge list.
    /// Duplicates and reversed listings collapse to one edge, self-loops
    /// are dropped.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a != b {
                rows[a].push(b);
                rows[b].push(a);
            }
        }
        Self::from_rows(n, rows)
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    pub fn degree(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    pub fn is_square(&self) -> bool {
        self.num_rows == self.num_cols
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.iter().filter(|&(r, c)| r < c).collect()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.iter().filter(|&(r, c)| r < c).count()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.num_cols];
        for (r, c) in self.iter() {
            rows[c].push(r);
        }
        // rows are filled in increasing r, already sorted
        let mut row_offsets = Vec::with_capacity(self.num_cols + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for row in rows {
            col_indices.extend(row);
            row_offsets.push(col_indices.len());
        }
        Self {
            num_rows: self.num_cols,
            num_cols: self.num_rows,
            row_offsets,
            col_indices,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.num_rows.min(self.num_cols)).all(|i| !self.contains(i, i))
    }

    /// Union of the pattern with its transpose.
    pub fn symmetrized(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::shape("symmetrize", self.num_rows, self.num_cols));
        }
        let mut rows: Vec<Vec<usize>> = (0..self.num_rows).map(|r| self.row(r).to_vec()).collect();
        for (r, c) in self.iter() {
            rows[c].push(r);
        }
        Self::from_rows(self.num_cols, rows)
    }

    /// Pattern with every diagonal entry present (union, not addition).
    pub fn with_self_loops(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::shape("self-loops", self.num_rows, self.num_cols));
        }
        let rows = (0..self.num_rows)
            .map(|r| {
                let mut row = self.row(r).to_vec();
                row.push(r);
                row
            })
            .collect();
        Self::from_rows(self.num_cols, rows)
    }

    pub fn to_dense<T: Scalar>(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.num_rows, self.num_cols));
        for (r, c) in self.iter() {
            out[(r, c)] = T::one();
        }
        out
    }

    /// Attach one value per stored entry.
    pub fn with_values<T: Scalar>(self, values: Vec<T>) -> Result<CsrMatrix<T>> {
        if values.len() != self.nnz() {
            return Err(Error::shape("csr values", self.nnz(), values.len()));
        }
        Ok(CsrMatrix {
            pattern: self,
            values,
        })
    }

    /// The 0/1 matrix of this pattern.
    pub fn to_unit<T: Scalar>(&self) -> CsrMatrix<T> {
        CsrMatrix {
            values: vec![T::one(); self.nnz()],
            pattern: self.clone(),
        }
    }
}

/// Real-valued CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    pattern: SparseAdjacency,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn pattern(&self) -> &SparseAdjacency {
        &self.pattern
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn num_rows(&self) -> usize {
        self.pattern.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.pattern.num_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (lo, hi) = (self.pattern.row_offsets[r], self.pattern.row_offsets[r + 1]);
        (&self.pattern.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c)
            .map(|k| vals[k])
            .unwrap_or_else(|_| T::zero())
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.num_rows())
            .map(|r| self.row(r).1.iter().copied().sum())
            .collect()
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.num_rows(), self.num_cols()));
        for r in 0..self.num_rows() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.num_cols()];
        for r in 0..self.num_rows() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                rows[c].push((r, v));
            }
        }
        let mut row_offsets = Vec::with_capacity(self.num_cols() + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for row in rows {
            for (c, v) in row {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            pattern: SparseAdjacency {
                num_rows: self.num_cols(),
                num_cols: self.num_rows(),
                row_offsets,
                col_indices,
            },
            values,
        }
    }

    /// `self × dense`, row-parallel. Cost is `nnz × dense.ncols()`.
    pub fn mul_dense(&self, dense: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if dense.nrows() != self.num_cols() {
            return Err(Error::shape(
                "sparse × dense",
                self.num_cols(),
                dense.nrows(),
            ));
        }
        let width = dense.ncols();
        let mut out = vec![T::zero(); self.num_rows() * width];
        if width > 0 {
            out.par_chunks_mut(width)
                .enumerate()
                .for_each(|(r, out_row)| {
                    let (cols, vals) = self.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        let src = dense.row(c);
                        for (o, &x) in out_row.iter_mut().zip(src.iter()) {
                            *o = *o + v * x;
                        }
                    }
                });
        }
        Ok(Array2::from_shape_vec((self.num_rows(), width), out).expect("shape"))
    }

    /// `selfᵀ × dense` without materializing the transpose.
    pub fn t_mul_dense(&self, dense: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if dense.nrows() != self.num_rows() {
            return Err(Error::shape(
                "sparseᵀ × dense",
                self.num_rows(),
                dense.nrows(),
            ));
        }
        let mut out = Array2::zeros((self.num_cols(), dense.ncols()));
        for r in 0..self.num_rows() {
            let (cols, vals) = self.row(r);
            let src = dense.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        Ok(out)
    }
}
