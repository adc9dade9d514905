use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Distinct node indices used as anchors, in sampling order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    indices: Vec<usize>,
    seed: u64,
}

impl AnchorSet {
    /// Explicit anchors; indices must be distinct and below `n`.
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "anchor indices must be distinct".into(),
            ));
        }
        if sorted.last().is_some_and(|&m| m >= n) {
            return Err(Error::InvalidArgument(format!(
                "anchor index out of range for {n} nodes"
            )));
        }
        Ok(Self { indices, seed: 0 })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Default anchor count `⌈0.1 · n⌉`.
pub fn default_anchor_count(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

/// Uniform sample of `s` distinct nodes out of `n`, without replacement.
pub fn sample_anchors(n: usize, s: usize, seed: u64) -> Result<AnchorSet> {
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "anchor count {s} must be in [1, {n}]"
        )));
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, Purpose::Anchors, 0);
    let (chosen, _) = nodes.partial_shuffle(&mut rng, s);
    Ok(AnchorSet {
        indices: chosen.to_vec(),
        seed,
    })
}
