//! Latent graph inference for semi-supervised node classification.
//!
//! A graph learner embeds node features, scores node pairs (or node-anchor
//! pairs) with a Gaussian kernel, smooths the scores over the observed
//! graph and samples a sparse latent graph. A GCN (or two-step anchor
//! message passing) classifies nodes over that graph. The learner is
//! trained with a reward-weighted log-likelihood of the sampled edges.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`).

pub mod data;
pub mod error;
pub mod learner;
pub mod mp;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::GraphDataset<f64>;
pub type Dataset32 = data::GraphDataset<f32>;
pub type Params = train::ModelParams<f64>;
pub type Params32 = train::ModelParams<f32>;
pub type Probabilities = learner::ProbabilityMatrix<f64>;
pub type Probabilities32 = learner::ProbabilityMatrix<f32>;
