//! Node representation learning over a sampled latent graph.

mod anchor;
mod gcn;
mod head;

pub use anchor::{anchor_aggregate, anchor_broadcast, TwoStepOperator};
pub use gcn::{gcn_forward, Dropout, GcnCache, GcnStack, Propagation, GCN_HIDDEN, GCN_LAYERS};
pub use head::{classify, predict, ClassifierHead};
