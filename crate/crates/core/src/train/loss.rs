//! Rewards, the classification loss and the reward-weighted graph loss.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::learner::{LatentGraph, ProbabilityMatrix, SCORE_FLOOR};
use crate::scalar::Scalar;

/// Per-node reward `δ_i = mean(c) − c_i` over an evaluation set, with
/// `c_i = 1` for a correct prediction. Treated as a constant downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector<T> {
    nodes: Vec<usize>,
    delta: Vec<T>,
    mean_correct: T,
}

impl<T: Scalar> RewardVector<T> {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn delta(&self) -> &[T] {
        &self.delta
    }

    pub fn mean_correct(&self) -> T {
        self.mean_correct
    }

    /// Explicit rewards, e.g. to hold them fixed in a gradient check.
    pub fn from_parts(nodes: Vec<usize>, delta: Vec<T>) -> Result<Self> {
        if nodes.len() != delta.len() {
            return Err(Error::shape("reward", nodes.len(), delta.len()));
        }
        let mean = if delta.is_empty() {
            T::zero()
        } else {
            delta.iter().copied().sum::<T>() / T::from_usize(delta.len()).expect("len")
        };
        Ok(Self {
            nodes,
            delta,
            mean_correct: mean,
        })
    }
}

pub fn reward<T: Scalar>(
    labels: &[usize],
    predictions: &[usize],
    eval_set: &[usize],
) -> Result<RewardVector<T>> {
    if eval_set.is_empty() {
        return Err(Error::InvalidArgument(
            "reward needs a non-empty evaluation set".into(),
        ));
    }
    let correct: Vec<bool> = eval_set
        .iter()
        .map(|&i| labels[i] == predictions[i])
        .collect();
    let hits = correct.iter().filter(|&&c| c).count();
    let mean = T::from_usize(hits).expect("count") / T::from_usize(eval_set.len()).expect("count");
    let delta = correct
        .iter()
        .map(|&c| if c { mean - T::one() } else { mean })
        .collect();
    Ok(RewardVector {
        nodes: eval_set.to_vec(),
        delta,
        mean_correct: mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub l_pred: T,
    pub l_graph: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn new(l_pred: T, l_graph: T) -> Self {
        Self {
            l_pred,
            l_graph,
            total: l_pred + l_graph,
        }
    }
}

/// `Σ_i δ_i Σ_{j ∈ sel(i)} log max(ŝ_ij, 1e-12)` over the rewarded nodes.
pub fn graph_loss<T: Scalar>(
    delta: &RewardVector<T>,
    scores: &ProbabilityMatrix<T>,
    a_star: &LatentGraph,
) -> Result<T> {
    Ok(graph_loss_terms(delta, scores, a_star)?.0)
}

/// `(row, col, dL_G/dŝ)` for each selected entry.
pub type ScoreGrads<T> = Vec<(usize, usize, T)>;

/// Loss value and `dL_G/dŝ` on the selected entries.
/// Clamped scores get a zero gradient.
pub fn graph_loss_terms<T: Scalar>(
    delta: &RewardVector<T>,
    scores: &ProbabilityMatrix<T>,
    a_star: &LatentGraph,
) -> Result<(T, ScoreGrads<T>)> {
    if a_star.num_rows() != scores.rows() {
        return Err(Error::shape(
            "graph loss rows",
            scores.rows(),
            a_star.num_rows(),
        ));
    }
    let floor = T::lit(SCORE_FLOOR);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(delta.nodes.len() * a_star.k());
    for (&i, &d) in delta.nodes.iter().zip(&delta.delta) {
        for &j in a_star.structure().row(i) {
            if j >= scores.cols() {
                return Err(Error::InvalidArgument(format!(
                    "sampled edge ({i}, {j}) outside a {}-column score matrix",
                    scores.cols()
                )));
            }
            let s = scores.get(i, j);
            loss = loss + d * s.max(floor).ln();
            grad.push((i, j, if s > floor { d / s } else { T::zero() }));
        }
    }
    Ok((loss, grad))
}

/// Mean softmax cross-entropy over `train_set`, with max-shifted log-sum-exp.
pub fn prediction_loss<T: Scalar>(
    logits: &Array2<T>,
    labels: &[usize],
    train_set: &[usize],
) -> Result<T> {
    Ok(prediction_loss_grad(logits, labels, train_set)?.0)
}

/// Loss and `dL/dlogits` (zero outside `train_set`).
pub fn prediction_loss_grad<T: Scalar>(
    logits: &Array2<T>,
    labels: &[usize],
    train_set: &[usize],
) -> Result<(T, Array2<T>)> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "logits".into(),
        });
    }
    let mut grad = Array2::zeros(logits.raw_dim());
    if train_set.is_empty() {
        return Ok((T::zero(), grad));
    }
    let count = T::from_usize(train_set.len()).expect("count");
    let mut loss = T::zero();
    for &i in train_set {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss = loss + log_z - row[labels[i]];
        for (c, &v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            let target = if c == labels[i] { T::one() } else { T::zero() };
            grad[(i, c)] = (p - target) / count;
        }
    }
    Ok((loss / count, grad))
}

pub fn accuracy(labels: &[usize], predictions: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy over an empty split".into(),
        ));
    }
    let hits = nodes
        .iter()
        .filter(|&&i| labels[i] == predictions[i])
        .count();
    Ok(hits as f64 / nodes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseAdjacency;
    use crate::learner::{ProbabilityKind, SampleMode};
    use ndarray::array;

    #[test]
    fn all_correct_gives_zero_reward() {
        let r = reward::<f64>(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(r.mean_correct(), 1.0);
        assert!(r.delta().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn half_correct() {
        let r = reward::<f64>(&[0, 1, 0, 1], &[0, 1, 1, 0], &[0, 1, 2, 3]).unwrap();
        assert_eq!(r.delta(), &[-0.5, -0.5, 0.5, 0.5]);
    }

    #[test]
    fn one_of_three_correct() {
        let r = reward::<f64>(&[0, 0, 0], &[0, 1, 1], &[0, 1, 2]).unwrap();
        assert!((r.mean_correct() - 1.0 / 3.0).abs() < 1e-15);
        let expected = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (d, e) in r.delta().iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }
        assert!(r.delta().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn empty_eval_set() {
        assert!(reward::<f64>(&[0], &[0], &[]).is_err());
    }

    fn two_node_setup(s: [f64; 2]) -> (ProbabilityMatrix<f64>, LatentGraph) {
        let scores = ProbabilityMatrix::from_scores(
            array![[s[0], 1.0], [1.0, s[1]]],
            ProbabilityKind::NodeNode,
            true,
        )
        .unwrap();
        let latent = LatentGraph::from_structure(
            SparseAdjacency::from_rows(2, vec![vec![0], vec![1]]).unwrap(),
            1,
            SampleMode::Deterministic,
            ProbabilityKind::NodeNode,
        )
        .unwrap();
        (scores, latent)
    }

    #[test]
    fn graph_loss_by_hand() {
        let (scores, latent) = two_node_setup([0.5, 0.25]);
        let delta = RewardVector::from_parts(vec![0, 1], vec![0.5, -0.5]).unwrap();
        let l = graph_loss(&delta, &scores, &latent).unwrap();
        let expected = 0.5 * 0.5f64.ln() - 0.5 * 0.25f64.ln();
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.3466).abs() < 1e-4);
    }

    #[test]
    fn graph_loss_vanishes() {
        let (scores, latent) = two_node_setup([0.5, 0.25]);
        let zero = RewardVector::from_parts(vec![0, 1], vec![0.0, 0.0]).unwrap();
        assert_eq!(graph_loss(&zero, &scores, &latent).unwrap(), 0.0);
        let (ones, latent) = two_node_setup([1.0, 1.0]);
        let delta = RewardVector::from_parts(vec![0, 1], vec![0.7, -0.2]).unwrap();
        assert_eq!(graph_loss(&delta, &ones, &latent).unwrap(), 0.0);
    }

    #[test]
    fn graph_loss_gradient_is_delta_over_score() {
        let (scores, latent) = two_node_setup([0.5, 0.25]);
        let delta = RewardVector::from_parts(vec![0, 1], vec![0.5, -0.5]).unwrap();
        let (_, grad) = graph_loss_terms(&delta, &scores, &latent).unwrap();
        assert_eq!(grad, vec![(0, 0, 1.0), (1, 1, -2.0)]);
    }

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = Array2::from_elem((3, 7), 0.3);
        let l = prediction_loss(&logits, &[0, 3, 6], &[0, 1, 2]).unwrap();
        assert!((l - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn large_margin_loss_vanishes() {
        let logits = array![[50.0, 0.0, 0.0]];
        assert!(prediction_loss(&logits, &[0], &[0]).unwrap() < 1e-20);
    }

    #[test]
    fn non_finite_logits_rejected() {
        let logits = array![[f64::NAN, 0.0]];
        assert!(prediction_loss(&logits, &[0], &[0]).is_err());
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(
            accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2], &[0, 1, 2, 3]).unwrap(),
            0.75
        );
        assert!(accuracy(&[0], &[0], &[]).is_err());
    }
}
