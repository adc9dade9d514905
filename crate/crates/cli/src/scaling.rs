//! Wall time of the graph-learning stage against graph size.

use std::path::Path;
use std::time::Instant;

use ppgnn::data::{generate_sbm, GraphDataset, SbmConfig};
use ppgnn::learner::SampleMode;
use ppgnn::train::{GraphContext, ModelInit, ModelMode, ModelParams};
use serde::{Deserialize, Serialize};

use crate::config::ScalingConfig;
use crate::error::Result;
use crate::output::{write_csv, write_json};
use crate::stats::{log_log_slope, median};

pub const SCALING_FILE: &str = "scaling.csv";
pub const SCALING_SUMMARY_FILE: &str = "scaling.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Oom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub edges: usize,
    pub node_node_ms: Option<f64>,
    pub node_node_status: CellStatus,
    pub anchor_ms: Option<f64>,
    pub anchor_status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub anchors: usize,
    pub k: usize,
    pub repetitions: usize,
    /// Least-squares slope of ln(ms) against ln(N); `None` with < 2 timed sizes.
    pub node_node_slope: Option<f64>,
    pub anchor_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub summary: ScalingSummary,
}

/// SBM of `n` nodes with the configured expected degree, 80 % of it
/// inside blocks.
pub fn scaling_graph(config: &ScalingConfig, n: usize, seed: u64) -> Result<GraphDataset<f64>> {
    let blocks = config.num_blocks.min(n);
    let m = (n / blocks).max(2) as f64;
    let d = config.mean_degree;
    let p_in = (0.8 * d / (m - 1.0)).min(1.0);
    let p_out = if n as f64 > m {
        (0.2 * d / (n as f64 - m)).min(1.0)
    } else {
        0.0
    };
    Ok(generate_sbm(&SbmConfig::new(
        n,
        blocks,
        p_in,
        p_out,
        config.feat_dim,
        1.0,
        seed,
    ))?)
}

/// Bytes of the two dense score matrices the node-node learner holds.
pub fn node_node_bytes(n: usize) -> usize {
    2usize
        .saturating_mul(n)
        .saturating_mul(n)
        .saturating_mul(std::mem::size_of::<f64>())
}

/// Median wall time (ms) of embed, score, pass and sparsify.
pub fn time_graph_learning(
    params: &ModelParams<f64>,
    dataset: &GraphDataset<f64>,
    repetitions: usize,
) -> Result<f64> {
    let ctx = GraphContext::new(dataset)?;
    let x = dataset.features().view();
    let mut times = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let t0 = Instant::now();
        let state = params.learn_graph(&ctx, x)?.expect("learned-graph mode");
        let latent = params.sample(&state, SampleMode::Stochastic, rep as u64)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        drop((state, latent));
    }
    Ok(median(&mut times).unwrap_or(0.0))
}

pub fn scaling(config: &ScalingConfig, seed: u64) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for &n in &config.sizes {
        let dataset = scaling_graph(config, n, seed)?;
        let init = |mode, anchors| ModelInit {
            mode,
            k: config.k.min(n),
            anchors,
            graph_conv: false,
            seed,
        };
        let (node_node_ms, node_node_status) = if node_node_bytes(n) > config.memory_budget_mb << 20
        {
            (None, CellStatus::Oom)
        } else {
            let params = ModelParams::init(&dataset, init(ModelMode::Ppgnn, None))?;
            (
                Some(time_graph_learning(&params, &dataset, config.repetitions)?),
                CellStatus::Ok,
            )
        };
        let s = config.anchors.min(n);
        let params = ModelParams::init(&dataset, init(ModelMode::PpgnnAnchor, Some(s)))?;
        let anchor_ms = time_graph_learning(&params, &dataset, config.repetitions)?;
        rows.push(ScalingRow {
            n,
            edges: dataset.adjacency().num_undirected_edges(),
            node_node_ms,
            node_node_status,
            anchor_ms: Some(anchor_ms),
            anchor_status: CellStatus::Ok,
        });
    }
    let slope = |f: fn(&ScalingRow) -> Option<f64>| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| f(r).map(|t| (r.n as f64, t)))
            .collect();
        log_log_slope(&pts)
    };
    let summary = ScalingSummary {
        anchors: config.anchors,
        k: config.k,
        repetitions: config.repetitions,
        node_node_slope: slope(|r| r.node_node_ms),
        anchor_slope: slope(|r| r.anchor_ms),
    };
    Ok(ScalingReport { rows, summary })
}

pub fn run_scaling(config: &ScalingConfig, seed: u64, out: &Path) -> Result<ScalingReport> {
    let report = scaling(config, seed)?;
    write_report(out, &report)?;
    Ok(report)
}

pub fn write_report(dir: &Path, report: &ScalingReport) -> Result<()> {
    write_csv(&dir.join(SCALING_FILE), &report.rows)?;
    write_json(&dir.join(SCALING_SUMMARY_FILE), &report.summary)
}
