use std::cmp::Ordering;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probability::{ProbabilityKind, ProbabilityMatrix};
use crate::data::SparseAdjacency;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

/// Scores are clamped to this value before taking logarithms.
pub const SCORE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Gumbel-perturbed top-k.
    Stochastic,
    /// Plain top-k, ties to the lowest column.
    Deterministic,
}

/// Sampled sparse structure: every row selects exactly `k` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentGraph {
    structure: SparseAdjacency,
    k: usize,
    mode: SampleMode,
    kind: ProbabilityKind,
}

impl LatentGraph {
    /// Wraps an explicit selection. Every row must hold exactly `k` entries.
    pub fn from_structure(
        structure: SparseAdjacency,
        k: usize,
        mode: SampleMode,
        kind: ProbabilityKind,
    ) -> Result<Self> {
        if let Some(r) = (0..structure.num_rows()).find(|&r| structure.degree(r) != k) {
            return Err(Error::InvalidArgument(format!(
                "row {r} selects {} columns, expected {k}",
                structure.degree(r)
            )));
        }
        Ok(Self {
            structure,
            k,
            mode,
            kind,
        })
    }

    pub fn structure(&self) -> &SparseAdjacency {
        &self.structure
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn kind(&self) -> ProbabilityKind {
        self.kind
    }

    pub fn num_rows(&self) -> usize {
        self.structure.num_rows()
    }

    pub fn num_cols(&self) -> usize {
        self.structure.num_cols()
    }
}

fn descending_then_lowest_index<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

fn top_k<T: Scalar>(mut keyed: Vec<(T, usize)>, k: usize) -> Vec<usize> {
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, descending_then_lowest_index);
        keyed.truncate(k);
    }
    let mut cols: Vec<usize> = keyed.into_iter().map(|(_, c)| c).collect();
    cols.sort_unstable();
    cols
}

/// Selects `k` columns per row.
///
/// Stochastic mode draws `q ~ U(0, 1)` per entry from the row's own stream
/// and keeps the `k` largest `log(max(s, 1e-12)) − log(−log q)`, which is a
/// sample without replacement from the categorical law `s / Σs`.
pub fn gumbel_top_k<T: Scalar>(
    scores: &ProbabilityMatrix<T>,
    k: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<LatentGraph> {
    let cols = scores.cols();
    if k == 0 || k > cols {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in [1, {cols}]"
        )));
    }
    let floor = T::lit(SCORE_FLOOR);
    let s = scores.scores();
    let rows: Vec<Vec<usize>> = (0..scores.rows())
        .into_par_iter()
        .map(|i| {
            let row = s.row(i);
            let keyed: Vec<(T, usize)> = match mode {
                SampleMode::Deterministic => row.iter().copied().zip(0..).collect(),
                SampleMode::Stochastic => {
                    let mut rng = stream(seed, Purpose::Gumbel, i as u64);
                    row.iter()
                        .enumerate()
                        .map(|(c, &v)| {
                            let q: f64 = rng.sample(Open01);
                            let gumbel = T::lit(-(-q.ln()).ln());
                            (v.max(floor).ln() + gumbel, c)
                        })
                        .collect()
                }
            };
            top_k(keyed, k)
        })
        .collect();
    let structure = SparseAdjacency::from_rows(cols, rows)?;
    LatentGraph::from_structure(structure, k, mode, scores.kind())
}
