//! Same-label ratio of test pairs binned by refined edge probability.

use std::path::Path;

use ppgnn::data::{perturb_edges, GraphDataset, Split};
use ppgnn::rng::{stream, Purpose};
use ppgnn::train::{fit, GraphContext, ModelParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, HomophilyConfig};
use crate::error::{CliError, Result};
use crate::output::{write_csv, write_json};
use crate::stats::spearman;

pub const HOMOPHILY_FILE: &str = "homophily.csv";
pub const HOMOPHILY_SUMMARY_FILE: &str = "homophily.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyRow {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub pairs: u64,
    pub same_label: u64,
    /// `None` for an empty bin.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilySummary {
    pub trained: bool,
    pub total_pairs: u64,
    pub sampled: bool,
    pub non_empty_bins: usize,
    /// Spearman correlation of bin index against ratio over non-empty bins.
    pub spearman: Option<f64>,
    /// Ratio strictly increases from each non-empty bin to the next.
    pub strictly_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub rows: Vec<HomophilyRow>,
    pub summary: HomophilySummary,
}

/// Bin of a score in `(0, 1]` among `bins` equal-width bins `(b/B, (b+1)/B]`.
pub fn bin_of(score: f64, bins: usize) -> usize {
    let b = (score * bins as f64).ceil() as usize;
    b.clamp(1, bins) - 1
}

/// Bins the refined scores between test nodes.
///
/// Node-node models use ordered pairs `(i, j)` of distinct test nodes and
/// the score `ŝ_ij`. Anchor models use pairs of a test node and an anchor
/// other than itself, labelled by the anchor node. When there are more
/// than `max_pairs` pairs, `max_pairs` are drawn uniformly with replacement.
pub fn homophily(
    params: &ModelParams<f64>,
    dataset: &GraphDataset<f64>,
    config: &HomophilyConfig,
    seed: u64,
) -> Result<HomophilyReport> {
    let ctx = GraphContext::new(dataset)?;
    let state = params
        .learn_graph(&ctx, dataset.features().view())?
        .ok_or_else(|| CliError::config(format!("mode {} learns no graph", params.mode)))?;
    let scores = state.refined.scores();
    let test = dataset.split(Split::Test);
    if test.is_empty() {
        return Err(CliError::data("test split is empty"));
    }
    let labels = dataset.labels();
    let columns: Vec<usize> = match &params.anchors {
        Some(a) => a.indices().to_vec(),
        None => (0..dataset.num_nodes()).collect(),
    };
    // column positions of the candidate partners
    let partners: Vec<usize> = match &params.anchors {
        Some(_) => (0..columns.len()).collect(),
        None => test.to_vec(),
    };

    let bins = config.num_bins;
    let mut pairs = vec![0u64; bins];
    let mut same = vec![0u64; bins];
    let mut record = |i: usize, c: usize| {
        let b = bin_of(scores[(i, c)], bins);
        pairs[b] += 1;
        if labels[i] == labels[columns[c]] {
            same[b] += 1;
        }
    };

    let valid = |i: usize, c: usize| columns[c] != i;
    let total: u64 = test
        .iter()
        .map(|&i| partners.iter().filter(|&&c| valid(i, c)).count() as u64)
        .sum();
    let sampled = total > config.max_pairs as u64;
    if sampled {
        let mut rng = stream(seed, Purpose::PairSample, 0);
        let mut drawn = 0;
        while drawn < config.max_pairs {
            let i = test[rng.random_range(0..test.len())];
            let c = partners[rng.random_range(0..partners.len())];
            if valid(i, c) {
                record(i, c);
                drawn += 1;
            }
        }
    } else {
        for &i in test {
            for &c in &partners {
                if valid(i, c) {
                    record(i, c);
                }
            }
        }
    }

    let rows: Vec<HomophilyRow> = (0..bins)
        .map(|b| HomophilyRow {
            bin: b,
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            pairs: pairs[b],
            same_label: same[b],
            ratio: (pairs[b] > 0).then(|| same[b] as f64 / pairs[b] as f64),
        })
        .collect();
    let filled: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.ratio.map(|v| (r.bin as f64, v)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = filled.iter().copied().unzip();
    let summary = HomophilySummary {
        trained: false,
        total_pairs: total,
        sampled,
        non_empty_bins: filled.len(),
        spearman: spearman(&x, &y),
        strictly_increasing: y.windows(2).all(|w| w[0] < w[1]),
    };
    Ok(HomophilyReport { rows, summary })
}

/// Trains run 0 (or keeps the initialization when `untrained`) and writes
/// the binned table and its summary.
pub fn run_homophily(config: &ExperimentConfig, untrained: bool) -> Result<HomophilyReport> {
    let dataset = config.data.load(None)?;
    let report = homophily_for(config, &dataset, untrained)?;
    write_report(&config.out_dir(), &report)?;
    Ok(report)
}

pub fn homophily_for(
    config: &ExperimentConfig,
    dataset: &GraphDataset<f64>,
    untrained: bool,
) -> Result<HomophilyReport> {
    if !config.train.mode.learns_graph() {
        return Err(CliError::config(format!(
            "mode {} learns no graph",
            config.train.mode
        )));
    }
    // score on the graph the model was trained on
    let noisy;
    let dataset = match config.run_noise(0) {
        Some(n) => {
            noisy = perturb_edges(dataset, &n)?.dataset;
            &noisy
        }
        None => dataset,
    };
    let train = config.run_train_config(0);
    let params = if untrained {
        ModelParams::init(dataset, train.model_init())?
    } else {
        fit(dataset, &train)?.params
    };
    let mut report = homophily(&params, dataset, &config.homophily, config.run_seed(0))?;
    report.summary.trained = !untrained;
    Ok(report)
}

pub fn write_report(dir: &Path, report: &HomophilyReport) -> Result<()> {
    write_csv(&dir.join(HOMOPHILY_FILE), &report.rows)?;
    write_json(&dir.join(HOMOPHILY_SUMMARY_FILE), &report.summary)
}
