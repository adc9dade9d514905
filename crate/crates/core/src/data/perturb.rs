use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::GraphDataset;
use super::sparse::SparseAdjacency;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Add,
    Delete,
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseMode::Add => "add",
            NoiseMode::Delete => "delete",
        })
    }
}

/// Random structural noise; `ratio` is relative to the number of
/// undirected edges in the input graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub ratio: f64,
    pub seed: u64,
}

/// Undirected edges (`i < j`) changed by a perturbation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDiff {
    pub added: Vec<(usize, usize)>,
    pub removed: Vec<(usize, usize)>,
}

impl EdgeDiff {
    /// Applies the inverse change to `adjacency`.
    pub fn revert(&self, adjacency: &SparseAdjacency) -> Result<SparseAdjacency> {
        let added: HashSet<_> = self.added.iter().copied().collect();
        let mut edges: Vec<_> = adjacency
            .undirected_edges()
            .into_iter()
            .filter(|e| !added.contains(e))
            .collect();
        edges.extend_from_slice(&self.removed);
        SparseAdjacency::from_undirected_edges(adjacency.num_rows(), &edges)
    }
}

#[derive(Debug, Clone)]
pub struct Perturbed<T> {
    pub dataset: GraphDataset<T>,
    pub diff: EdgeDiff,
}

/// Deletes or inserts `⌊ratio · |E|⌋` uniformly chosen undirected edges.
/// Features, labels and splits are untouched.
pub fn perturb_edges<T: Scalar>(g: &GraphDataset<T>, spec: &NoiseSpec) -> Result<Perturbed<T>> {
    if !(spec.ratio >= 0.0 && spec.ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise ratio {} must be >= 0",
            spec.ratio
        )));
    }
    let mut edges = g.adjacency().undirected_edges();
    let count = (spec.ratio * edges.len() as f64).floor() as usize;
    let n = g.num_nodes();
    let mut rng = stream(spec.seed, Purpose::Perturb, 0);

    let diff = match spec.mode {
        NoiseMode::Delete => {
            if spec.ratio > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "cannot delete more than all edges (ratio {})",
                    spec.ratio
                )));
            }
            let (chosen, _) = edges.partial_shuffle(&mut rng, count);
            let mut removed = chosen.to_vec();
            removed.sort_unstable();
            EdgeDiff {
                added: Vec::new(),
                removed,
            }
        }
        NoiseMode::Add => {
            let absent = n * n.saturating_sub(1) / 2 - edges.len();
            if count > absent {
                return Err(Error::InvalidArgument(format!(
                    "cannot add {count} edges: only {absent} node pairs are unconnected"
                )));
            }
            let existing: HashSet<(usize, usize)> = edges.iter().copied().collect();
            let mut seen = HashSet::with_capacity(count);
            let mut added = Vec::with_capacity(count);
            while added.len() < count {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a == b {
                    continue;
                }
                let e = (a.min(b), a.max(b));
                if !existing.contains(&e) && seen.insert(e) {
                    added.push(e);
                }
            }
            EdgeDiff {
                added,
                removed: Vec::new(),
            }
        }
    };

    let removed: HashSet<_> = diff.removed.iter().copied().collect();
    edges.retain(|e| !removed.contains(e));
    edges.extend_from_slice(&diff.added);
    let adjacency = SparseAdjacency::from_undirected_edges(n, &edges)?;
    Ok(Perturbed {
        dataset: g.with_adjacency(adjacency)?,
        diff,
    })
}
