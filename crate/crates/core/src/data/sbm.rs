use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{GraphDataset, Splits};
use super::sparse::SparseAdjacency;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

/// Stochastic block model with block-centroid features.
///
/// Node `i` belongs to a contiguous block (the first `num_nodes % num_blocks`
/// blocks get one extra node); its label is the block index. Each unordered
/// pair is an edge with probability `p_in` inside a block and `p_out`
/// across blocks. Features are the one-hot block indicator (in the first
/// `num_blocks` coordinates) plus `N(0, feat_noise²)` noise on every
/// coordinate. Splits are a seeded random partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmConfig {
    pub num_nodes: usize,
    pub num_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feat_noise: f64,
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.2
}

fn default_val_fraction() -> f64 {
    0.2
}

impl SbmConfig {
    pub fn new(
        num_nodes: usize,
        num_blocks: usize,
        p_in: f64,
        p_out: f64,
        feat_dim: usize,
        feat_noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            num_nodes,
            num_blocks,
            p_in,
            p_out,
            feat_dim,
            feat_noise,
            seed,
            train_fraction: default_train_fraction(),
            val_fraction: default_val_fraction(),
        }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let base = self.num_nodes / self.num_blocks;
        let extra = self.num_nodes % self.num_blocks;
        (0..self.num_blocks)
            .map(|b| base + usize::from(b < extra))
            .collect()
    }

    pub fn block_of_nodes(&self) -> Vec<usize> {
        self.block_sizes()
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.num_blocks > self.num_nodes {
            return Err(Error::InvalidArgument(format!(
                "num_blocks = {} must be in [1, num_nodes = {}]",
                self.num_blocks, self.num_nodes
            )));
        }
        if !(0.0..=1.0).contains(&self.p_out)
            || !(0.0..=1.0).contains(&self.p_in)
            || self.p_out > self.p_in
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= p_out ({}) <= p_in ({}) <= 1",
                self.p_out, self.p_in
            )));
        }
        if self.feat_dim < self.num_blocks {
            return Err(Error::InvalidArgument(format!(
                "feat_dim = {} cannot hold {} one-hot block centroids",
                self.feat_dim, self.num_blocks
            )));
        }
        if !(self.feat_noise >= 0.0 && self.feat_noise.is_finite()) {
            return Err(Error::InvalidArgument(
                "feat_noise must be finite and >= 0".into(),
            ));
        }
        let (tr, va) = (self.train_fraction, self.val_fraction);
        if !(tr >= 0.0 && va >= 0.0 && tr + va <= 1.0) {
            return Err(Error::InvalidArgument(
                "split fractions must be >= 0 and sum to <= 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn generate_sbm<T: Scalar>(config: &SbmConfig) -> Result<GraphDataset<T>> {
    config.validate()?;
    let n = config.num_nodes;
    let block = config.block_of_nodes();

    let mut rng = stream(config.seed, Purpose::Sbm, 0);
    let mut rows = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block[i] == block[j] {
                config.p_in
            } else {
                config.p_out
            };
            if rng.random::<f64>() < p {
                rows[i].push(j);
                rows[j].push(i);
            }
        }
    }
    let adjacency = SparseAdjacency::from_rows(n, rows)?;

    let mut rng = stream(config.seed, Purpose::Features, 0);
    let mut features = Array2::zeros((n, config.feat_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let centroid = if c == block[i] { 1.0 } else { 0.0 };
            *v = T::lit(centroid + config.feat_noise * noise);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(config.seed, Purpose::Splits, 0));
    let n_train = (config.train_fraction * n as f64).round() as usize;
    let n_val = ((config.val_fraction * n as f64).round() as usize).min(n - n_train);
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    GraphDataset::new(features, adjacency, block, splits, Some(config.num_blocks))
}
