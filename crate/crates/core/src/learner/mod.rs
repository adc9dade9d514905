//! Latent graph construction: embeddings, kernel probabilities, probability
//! passing, anchors and Gumbel-top-k sparsification.

mod anchors;
mod embedding;
mod probability;
mod sparsify;

pub use anchors::{default_anchor_count, sample_anchors, AnchorSet};
pub use embedding::{
    EmbedCache, EmbedGrad, EmbeddingNet, EMBED_DIM, EMBED_HIDDEN, TEMPERATURE_FLOOR,
};
pub use probability::{
    anchor_probability_passing, kernel_backward, node_anchor_probabilities, pairwise_probabilities,
    pass_probabilities, passing_operator, probability_passing, ProbabilityKind, ProbabilityMatrix,
};
pub use sparsify::{gumbel_top_k, LatentGraph, SampleMode, SCORE_FLOOR};
