//! Repeated seeded training runs and their summary.

use std::path::Path;
use std::time::Instant;

use ppgnn::data::{perturb_edges, GraphDataset};
use ppgnn::train::{fit, EpochRecord, FitResult, ModelMode};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{write_json, write_jsonl};
use crate::stats::mean_std;

pub const METRICS_FILE: &str = "metrics.json";
pub const EPOCHS_FILE: &str = "epochs.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub test_acc: Option<f64>,
    pub best_val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mode: ModelMode,
    pub num_runs: usize,
    pub completed: usize,
    /// Over completed runs only.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Set when some runs failed.
    pub warning: Option<String>,
    pub runs: Vec<RunRecord>,
    pub total_wall_ms: f64,
}

impl MetricsRecord {
    fn summarize(mode: ModelMode, runs: Vec<RunRecord>, total_wall_ms: f64) -> Self {
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.test_acc).collect();
        let failed = runs
            .iter()
            .filter(|r| r.status == RunStatus::Failed)
            .count();
        let summary = mean_std(&accs);
        Self {
            mode,
            num_runs: runs.len(),
            completed: runs.len() - failed,
            mean: summary.map(|s| s.0),
            std: summary.map(|s| s.1),
            warning: (failed > 0).then(|| format!("{failed} of {} runs failed", runs.len())),
            runs,
            total_wall_ms,
        }
    }

    pub fn test_accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.test_acc).collect()
    }
}

/// One line of `epochs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine {
    pub run: usize,
    #[serde(flatten)]
    pub record: EpochRecord,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub metrics: MetricsRecord,
    pub traces: Vec<TraceLine>,
    /// Fitted model of each completed run.
    pub fits: Vec<Option<FitResult<f64>>>,
}

/// Trains run `index` of `config` on `dataset`, applying the run's noise.
pub fn train_run(
    config: &ExperimentConfig,
    dataset: &GraphDataset<f64>,
    index: usize,
) -> ppgnn::Result<FitResult<f64>> {
    let train = config.run_train_config(index);
    match config.run_noise(index) {
        Some(noise) => fit(&perturb_edges(dataset, &noise)?.dataset, &train),
        None => fit(dataset, &train),
    }
}

/// Runs `config.num_runs` seeded runs. Diverged runs are recorded as
/// failed; any other error aborts.
pub fn benchmark(
    config: &ExperimentConfig,
    dataset: &GraphDataset<f64>,
) -> Result<BenchmarkOutcome> {
    let started = Instant::now();
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    let mut fits = Vec::new();
    for index in 0..config.num_runs {
        let t0 = Instant::now();
        let seed = config.run_seed(index);
        match train_run(config, dataset, index) {
            Ok(result) => {
                runs.push(RunRecord {
                    run: index,
                    seed,
                    status: RunStatus::Ok,
                    test_acc: Some(result.test_acc).filter(|a| a.is_finite()),
                    best_val_acc: Some(result.best_val_acc).filter(|a| a.is_finite()),
                    best_epoch: result.best_epoch,
                    epochs_run: result.epochs.len(),
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    error: None,
                });
                traces.extend(result.epochs.iter().map(|e| TraceLine {
                    run: index,
                    record: e.clone(),
                }));
                fits.push(Some(result));
            }
            Err(e) if e.is_numerical() => {
                runs.push(RunRecord {
                    run: index,
                    seed,
                    status: RunStatus::Failed,
                    test_acc: None,
                    best_val_acc: None,
                    best_epoch: None,
                    epochs_run: 0,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    error: Some(e.to_string()),
                });
                fits.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let metrics = MetricsRecord::summarize(
        config.train.mode,
        runs,
        started.elapsed().as_secs_f64() * 1e3,
    );
    Ok(BenchmarkOutcome {
        metrics,
        traces,
        fits,
    })
}

/// Writes `metrics.json` and `epochs.jsonl` into `dir`.
pub fn write_outcome(dir: &Path, outcome: &BenchmarkOutcome) -> Result<()> {
    write_jsonl(&dir.join(EPOCHS_FILE), &outcome.traces)?;
    write_json(&dir.join(METRICS_FILE), &outcome.metrics)
}

/// Loads the data, runs the benchmark and writes its files. Fails with a
/// numerical error when no run completed.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<MetricsRecord> {
    let dataset = config.data.load(None)?;
    let outcome = benchmark(config, &dataset)?;
    write_outcome(&config.out_dir(), &outcome)?;
    if outcome.metrics.completed == 0 {
        let reason = outcome
            .metrics
            .runs
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(CliError::Numerical(format!("every run failed: {reason}")));
    }
    Ok(outcome.metrics)
}
