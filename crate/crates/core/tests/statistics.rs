//! Monte Carlo checks of the samplers against their exact laws (4σ bounds).

mod common;

use common::binomial_sigma;
use ndarray::Array2;
use ppgnn::data::{generate_sbm, SbmConfig};
use ppgnn::learner::{
    gumbel_top_k, sample_anchors, ProbabilityKind, ProbabilityMatrix, SampleMode,
};

fn repeated_row(row: &[f64], draws: usize) -> ProbabilityMatrix<f64> {
    let scores = Array2::from_shape_fn((draws, row.len()), |(_, j)| row[j]);
    ProbabilityMatrix::from_scores(scores, ProbabilityKind::NodeAnchor, true).unwrap()
}

/// Top-1 frequencies over `draws` independent rows, and the law `s / Σs`.
pub fn top1_frequencies(row: &[f64], draws: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let latent = gumbel_top_k(&repeated_row(row, draws), 1, SampleMode::Stochastic, seed).unwrap();
    let mut counts = vec![0usize; row.len()];
    for (_, c) in latent.structure().iter() {
        counts[c] += 1;
    }
    let total: f64 = row.iter().sum();
    (
        counts.iter().map(|&c| c as f64 / draws as f64).collect(),
        row.iter().map(|s| s / total).collect(),
    )
}

#[test]
fn gumbel_top1_follows_normalized_scores() {
    let draws = 200_000;
    for (row, seed) in [
        (&[0.6, 0.3, 0.1][..], 1),
        (&[0.05, 0.4, 0.2, 0.9, 0.01][..], 2),
    ] {
        let (freq, law) = top1_frequencies(row, draws, seed);
        for (f, p) in freq.iter().zip(&law) {
            let sigma = binomial_sigma(*p, draws);
            assert!(
                (f - p).abs() < 4.0 * sigma,
                "freq {f} law {p} sigma {sigma}"
            );
        }
    }
}

#[test]
fn gumbel_rows_have_k_distinct_columns() {
    let row = [0.05, 0.4, 0.2, 0.9, 0.01];
    for k in 1..=5 {
        let latent = gumbel_top_k(
            &repeated_row(&row, 2000),
            k,
            SampleMode::Stochastic,
            k as u64,
        )
        .unwrap();
        for i in 0..2000 {
            let cols = latent.structure().row(i);
            assert_eq!(cols.len(), k);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn anchor_inclusion_is_uniform() {
    let (n, s, resamples) = (100, 10, 50_000);
    let mut counts = vec![0usize; n];
    for seed in 0..resamples {
        for &a in sample_anchors(n, s, seed as u64).unwrap().indices() {
            counts[a] += 1;
        }
    }
    let p = s as f64 / n as f64;
    let sigma = binomial_sigma(p, resamples);
    for (node, &c) in counts.iter().enumerate() {
        let f = c as f64 / resamples as f64;
        assert!((f - p).abs() < 4.0 * sigma, "node {node}: {f}");
    }
}

#[test]
fn sbm_edge_count_is_binomial() {
    let (n, blocks) = (200usize, 4usize);
    let (p_in, p_out) = (0.2, 0.01);
    let per_block = n / blocks;
    let intra = blocks * per_block * (per_block - 1) / 2;
    let inter = n * (n - 1) / 2 - intra;
    let mean = intra as f64 * p_in + inter as f64 * p_out;
    let var = intra as f64 * p_in * (1.0 - p_in) + inter as f64 * p_out * (1.0 - p_out);
    for seed in [7, 8, 9] {
        let g = generate_sbm::<f64>(&SbmConfig::new(n, blocks, p_in, p_out, 8, 0.1, seed)).unwrap();
        let edges = g.adjacency().num_undirected_edges() as f64;
        assert!(
            (edges - mean).abs() < 4.0 * var.sqrt(),
            "seed {seed}: {edges} vs {mean}"
        );
    }
}
