//! Gaussian-kernel edge probabilities and probability passing.
//!
//! Raw scores are `exp(-‖z_i − z_c‖² / t)` where `c` ranges over all nodes
//! (node-node) or over a sampled anchor set (node-anchor). Probability
//! passing left-multiplies the scores by the row-stochastic observed
//! adjacency with self-loops, so each node's row becomes the average of its
//! own row and its neighbours' rows.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::anchors::AnchorSet;
use crate::data::{degree_normalize, Normalization, NormalizedOperator, SparseAdjacency};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilityKind {
    NodeNode,
    NodeAnchor,
}

/// Dense edge scores. Entries lie in `(0, 1]`: kernel values that would
/// underflow are held at the smallest positive normal of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix<T> {
    scores: Array2<T>,
    kind: ProbabilityKind,
    refined: bool,
}

impl<T: Scalar> ProbabilityMatrix<T> {
    /// Wraps externally computed scores, checking the `(0, 1]` range.
    pub fn from_scores(scores: Array2<T>, kind: ProbabilityKind, refined: bool) -> Result<Self> {
        if let Some(v) = scores
            .iter()
            .find(|v| !(v.is_finite() && **v > T::zero() && **v <= T::one()))
        {
            return Err(Error::InvalidArgument(format!(
                "probability {v} outside (0, 1]"
            )));
        }
        if kind == ProbabilityKind::NodeNode && scores.nrows() != scores.ncols() {
            return Err(Error::shape(
                "node-node probabilities",
                scores.nrows(),
                scores.ncols(),
            ));
        }
        Ok(Self {
            scores,
            kind,
            refined,
        })
    }

    pub fn scores(&self) -> &Array2<T> {
        &self.scores
    }

    pub fn into_scores(self) -> Array2<T> {
        self.scores
    }

    pub fn kind(&self) -> ProbabilityKind {
        self.kind
    }

    pub fn is_refined(&self) -> bool {
        self.refined
    }

    pub fn rows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn cols(&self) -> usize {
        self.scores.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.scores[(row, col)]
    }
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

fn check_inputs<T: Scalar>(z: &ArrayView2<'_, T>, t: T) -> Result<()> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature {t} must be positive"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "embeddings".into(),
        });
    }
    Ok(())
}

/// Kernel scores between every row of `z` and the rows listed in `columns`.
fn kernel<T: Scalar>(z: ArrayView2<'_, T>, columns: &[usize], t: T) -> Array2<T> {
    let z = z.as_standard_layout();
    let dim = z.ncols();
    let flat = z.as_slice().expect("standard layout");
    let floor = T::min_positive_value();
    let width = columns.len();
    let mut out = vec![T::zero(); z.nrows() * width];
    if width > 0 && dim > 0 {
        out.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
            let zi = &flat[i * dim..(i + 1) * dim];
            for (o, &c) in row.iter_mut().zip(columns) {
                let zc = &flat[c * dim..(c + 1) * dim];
                *o = (-squared_distance(zi, zc) / t).exp().max(floor);
            }
        });
    } else {
        out.fill(T::one());
    }
    Array2::from_shape_vec((z.nrows(), width), out).expect("shape")
}

/// `p_ij = exp(-‖z_i − z_j‖² / t)` over all node pairs.
pub fn pairwise_probabilities<T: Scalar>(
    z: ArrayView2<'_, T>,
    t: T,
) -> Result<ProbabilityMatrix<T>> {
    check_inputs(&z, t)?;
    let columns: Vec<usize> = (0..z.nrows()).collect();
    Ok(ProbabilityMatrix {
        scores: kernel(z, &columns, t),
        kind: ProbabilityKind::NodeNode,
        refined: false,
    })
}

/// `r_ij = exp(-‖z_i − z_{u_j}‖² / t)` for anchors `u_j`.
pub fn node_anchor_probabilities<T: Scalar>(
    z: ArrayView2<'_, T>,
    anchors: &AnchorSet,
    t: T,
) -> Result<ProbabilityMatrix<T>> {
    check_inputs(&z, t)?;
    if let Some(&a) = anchors.indices().iter().find(|&&a| a >= z.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "anchor {a} out of range for {} nodes",
            z.nrows()
        )));
    }
    Ok(ProbabilityMatrix {
        scores: kernel(z, anchors.indices(), t),
        kind: ProbabilityKind::NodeAnchor,
        refined: false,
    })
}

/// Row-stochastic operator `D⁻¹(A⁽⁰⁾ + I)` used for probability passing.
pub fn passing_operator<T: Scalar>(a0: &SparseAdjacency) -> Result<NormalizedOperator<T>> {
    degree_normalize(a0, Normalization::RowStochastic, true)
}

/// Applies a prebuilt passing operator to unrefined scores.
pub fn pass_probabilities<T: Scalar>(
    operator: &NormalizedOperator<T>,
    p: &ProbabilityMatrix<T>,
) -> Result<ProbabilityMatrix<T>> {
    if p.refined {
        return Err(Error::InvalidArgument(
            "probabilities are already refined".into(),
        ));
    }
    if operator.dim() != p.rows() {
        return Err(Error::shape(
            "probability passing",
            operator.dim(),
            p.rows(),
        ));
    }
    let floor = T::min_positive_value();
    let mut scores = operator.apply(p.scores.view())?;
    // convex combinations of (0, 1] values; clamp only guards rounding
    scores.mapv_inplace(|v| v.max(floor).min(T::one()));
    Ok(ProbabilityMatrix {
        scores,
        kind: p.kind,
        refined: true,
    })
}

/// `P̂ = D⁻¹A⁽⁰⁾P` with self-loops added to `A⁽⁰⁾`.
pub fn probability_passing<T: Scalar>(
    a0: &SparseAdjacency,
    p: &ProbabilityMatrix<T>,
) -> Result<ProbabilityMatrix<T>> {
    if p.kind != ProbabilityKind::NodeNode {
        return Err(Error::InvalidArgument(
            "expected node-node probabilities".into(),
        ));
    }
    pass_probabilities(&passing_operator(a0)?, p)
}

/// `R̂ = D⁻¹A⁽⁰⁾R` with self-loops added to `A⁽⁰⁾`.
pub fn anchor_probability_passing<T: Scalar>(
    a0: &SparseAdjacency,
    r: &ProbabilityMatrix<T>,
) -> Result<ProbabilityMatrix<T>> {
    if r.kind != ProbabilityKind::NodeAnchor {
        return Err(Error::InvalidArgument(
            "expected node-anchor probabilities".into(),
        ));
    }
    pass_probabilities(&passing_operator(a0)?, r)
}

/// Gradient of a loss with respect to the embeddings and the temperature,
/// given its gradient on a sparse set of refined scores.
///
/// `refined_grad` holds `(row, col, dL/dŝ_row,col)`. The passing operator
/// is constant, so `dL/dP = Mᵀ · dL/dP̂`; each raw score then contributes
/// to both endpoint embeddings and to `t`. `columns` maps score columns to
/// node indices (`None` for node-node).
pub fn kernel_backward<T: Scalar>(
    z: ArrayView2<'_, T>,
    t: T,
    raw: &ProbabilityMatrix<T>,
    columns: Option<&AnchorSet>,
    operator: &NormalizedOperator<T>,
    refined_grad: &[(usize, usize, T)],
) -> (Array2<T>, T) {
    let m = operator.matrix();
    let mut raw_grad: Vec<(usize, usize, T)> = Vec::new();
    for &(i, col, g) in refined_grad {
        if g == T::zero() {
            continue;
        }
        let (nbrs, weights) = m.row(i);
        for (&a, &w) in nbrs.iter().zip(weights) {
            raw_grad.push((a, col, w * g));
        }
    }
    raw_grad.sort_by_key(|&(a, col, _)| (a, col));

    let floor = T::min_positive_value();
    let two = T::lit(2.0);
    let mut dz = Array2::zeros(z.raw_dim());
    let mut dt = T::zero();
    let mut idx = 0;
    while idx < raw_grad.len() {
        let (a, col, _) = raw_grad[idx];
        let mut h = T::zero();
        while idx < raw_grad.len() && raw_grad[idx].0 == a && raw_grad[idx].1 == col {
            h = h + raw_grad[idx].2;
            idx += 1;
        }
        let p = raw.get(a, col);
        if p <= floor {
            continue;
        }
        let b = columns.map_or(col, |anchors| anchors.indices()[col]);
        if a == b {
            continue;
        }
        let coef = h * p;
        let mut dist = T::zero();
        for c in 0..z.ncols() {
            let diff = z[(a, c)] - z[(b, c)];
            dist = dist + diff * diff;
            let g = coef * (-two / t) * diff;
            dz[(a, c)] = dz[(a, c)] + g;
            dz[(b, c)] = dz[(b, c)] - g;
        }
        dt = dt + coef * dist / (t * t);
    }
    (dz, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_distance_scores_one() {
        let z = array![[0.5, -1.0], [0.5, -1.0], [3.0, 0.0]];
        let p = pairwise_probabilities(z.view(), 1.0).unwrap();
        assert_eq!(p.get(0, 1), 1.0);
        for i in 0..3 {
            assert_eq!(p.get(i, i), 1.0);
        }
    }

    #[test]
    fn squared_distance_equal_to_t_gives_inverse_e() {
        let z = array![[0.0, 0.0], [1.0, 1.0]];
        let p = pairwise_probabilities(z.view(), 2.0).unwrap();
        assert!((p.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_temperature_and_nan() {
        let z = array![[0.0], [1.0]];
        assert!(pairwise_probabilities(z.view(), 0.0).is_err());
        let bad = array![[0.0], [f64::NAN]];
        assert!(matches!(
            pairwise_probabilities(bad.view(), 1.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn distant_points_stay_positive() {
        let z = array![[0.0], [1e3]];
        let p = pairwise_probabilities(z.view(), 1.0).unwrap();
        assert!(p.get(0, 1) > 0.0);
    }

    #[test]
    fn passing_twice_is_rejected() {
        let a = SparseAdjacency::identity(2);
        let z = array![[0.0], [1.0]];
        let p = pairwise_probabilities(z.view(), 1.0).unwrap();
        let refined = probability_passing(&SparseAdjacency::empty(2, 2), &p).unwrap();
        assert!(probability_passing(&a, &refined).is_err());
    }

    #[test]
    fn path_graph_identity_scores() {
        let a0 = SparseAdjacency::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p = ProbabilityMatrix::from_scores(
            Array2::<f64>::eye(3).mapv(|v| v.max(1e-300)),
            ProbabilityKind::NodeNode,
            false,
        )
        .unwrap();
        let refined = probability_passing(&a0, &p).unwrap();
        let third = 1.0 / 3.0;
        for (c, expected) in [third, third, third].iter().enumerate() {
            assert!((refined.get(1, c) - expected).abs() < 1e-15);
        }
        assert!((refined.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((refined.get(0, 1) - 0.5).abs() < 1e-15);
    }
}
