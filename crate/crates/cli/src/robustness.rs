//! Accuracy under random edge insertion and deletion.

use std::path::Path;

use ppgnn::data::{GraphDataset, NoiseMode, NoiseSpec};
use ppgnn::train::ModelMode;
use serde::{Deserialize, Serialize};

use crate::benchmark::{benchmark, MetricsRecord};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::write_csv;

pub const ROBUSTNESS_FILE: &str = "robustness.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub noise: NoiseMode,
    pub ratio: f64,
    pub model: ModelMode,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub completed: usize,
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub struct RobustnessCell {
    pub row: RobustnessRow,
    pub metrics: MetricsRecord,
}

/// Config of one cell. The perturbation seed of run `i` is
/// `train.seed + i` for every model, so models see the same graphs.
pub fn cell_config(
    base: &ExperimentConfig,
    model: ModelMode,
    noise: NoiseMode,
    ratio: f64,
) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.train.mode = model;
    if model.learns_graph() {
        if let Some(gc) = base.robustness.graph_conv {
            cfg.train.graph_conv = gc;
        }
    }
    cfg.noise = Some(NoiseSpec {
        mode: noise,
        ratio,
        seed: base.train.seed,
    });
    cfg
}

/// Benchmarks every (noise mode, ratio, model) cell. Ratio 0 is trained
/// once per model and reported under each noise mode.
pub fn robustness(
    config: &ExperimentConfig,
    dataset: &GraphDataset<f64>,
) -> Result<Vec<RobustnessCell>> {
    let models = if config.robustness.models.is_empty() {
        vec![config.train.mode]
    } else {
        config.robustness.models.clone()
    };
    let mut clean: Vec<(ModelMode, MetricsRecord)> = Vec::new();
    let mut cells = Vec::new();
    for &noise in &config.robustness.noise_modes {
        for &ratio in &config.robustness.ratios {
            for &model in &models {
                let cached = (ratio == 0.0)
                    .then(|| {
                        clean
                            .iter()
                            .find(|(m, _)| *m == model)
                            .map(|(_, r)| r.clone())
                    })
                    .flatten();
                let metrics = match cached {
                    Some(m) => m,
                    None => {
                        let m =
                            benchmark(&cell_config(config, model, noise, ratio), dataset)?.metrics;
                        if ratio == 0.0 {
                            clean.push((model, m.clone()));
                        }
                        m
                    }
                };
                cells.push(RobustnessCell {
                    row: RobustnessRow {
                        noise,
                        ratio,
                        model,
                        mean: metrics.mean,
                        std: metrics.std,
                        completed: metrics.completed,
                        runs: metrics.num_runs,
                    },
                    metrics,
                });
            }
        }
    }
    Ok(cells)
}

pub fn run_robustness(config: &ExperimentConfig) -> Result<Vec<RobustnessCell>> {
    let dataset = config.data.load(None)?;
    let cells = robustness(config, &dataset)?;
    write_table(&config.out_dir(), &cells)?;
    Ok(cells)
}

pub fn write_table(dir: &Path, cells: &[RobustnessCell]) -> Result<()> {
    let rows: Vec<_> = cells.iter().map(|c| c.row.clone()).collect();
    write_csv(&dir.join(ROBUSTNESS_FILE), &rows)
}
