//! Observed graphs: storage, datasets, synthetic generation, perturbation
//! and degree normalization.

mod dataset;
mod normalize;
mod perturb;
mod sbm;
mod sparse;

pub use dataset::{
    dataset_checksums, load_dataset, save_dataset, GraphDataset, Split, Splits, CHECKSUM_FILE,
    EDGES_FILE, FEATURES_FILE, LABELS_FILE, SPLITS_FILE,
};
pub use normalize::{degree_normalize, gcn_operator, Normalization, NormalizedOperator};
pub use perturb::{perturb_edges, EdgeDiff, NoiseMode, NoiseSpec, Perturbed};
pub use sbm::{generate_sbm, SbmConfig};
pub use sparse::{CsrMatrix, SparseAdjacency};
