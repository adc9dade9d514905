//! Experiment configuration: one JSON document, overridable from flags.

use std::path::{Path, PathBuf};

use ppgnn::data::{generate_sbm, load_dataset, GraphDataset, NoiseMode, NoiseSpec, SbmConfig};
use ppgnn::train::{ModelMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Where the graph comes from. Exactly one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Directory with features.csv, edges.csv, labels.csv and splits.json.
    Path(PathBuf),
    Sbm(SbmConfig),
}

impl DataSource {
    /// Loads or generates the dataset. Relative paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<GraphDataset<f64>> {
        match self {
            DataSource::Path(p) => {
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                load_dataset(&p)
                    .map_err(|e| CliError::data(format!("loading {}: {e}", p.display())))
            }
            DataSource::Sbm(cfg) => Ok(generate_sbm(cfg)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub ratios: Vec<f64>,
    pub noise_modes: Vec<NoiseMode>,
    /// Models compared at every cell; the run's own mode when empty.
    pub models: Vec<ModelMode>,
    /// Overrides `train.graph_conv` for the learned-graph models.
    pub graph_conv: Option<bool>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            ratios: vec![0.0, 0.25, 0.5, 0.75],
            noise_modes: vec![NoiseMode::Add, NoiseMode::Delete],
            models: Vec::new(),
            graph_conv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomophilyConfig {
    pub num_bins: usize,
    /// Test pairs beyond this count are subsampled uniformly.
    pub max_pairs: usize,
}

impl Default for HomophilyConfig {
    fn default() -> Self {
        Self {
            num_bins: 10,
            max_pairs: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub sizes: Vec<usize>,
    pub anchors: usize,
    pub k: usize,
    pub repetitions: usize,
    pub num_blocks: usize,
    /// Expected node degree of the generated graphs.
    pub mean_degree: f64,
    pub feat_dim: usize,
    /// Node-node runs whose dense score matrices would exceed this are
    /// reported as OOM instead of attempted.
    pub memory_budget_mb: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1000, 2000, 4000, 8000],
            anchors: 100,
            k: 4,
            repetitions: 5,
            num_blocks: 4,
            mean_degree: 4.0,
            feat_dim: 16,
            memory_budget_mb: 3072,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_runs")]
    pub num_runs: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub homophily: HomophilyConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

fn default_runs() -> usize {
    5
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<ModelMode>,
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            train: TrainConfig::default(),
            noise: None,
            num_runs: default_runs(),
            out: None,
            robustness: RobustnessConfig::default(),
            homophily: HomophilyConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative dataset path is resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSource::Path(p) = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(mode) = o.mode {
            self.train.mode = mode;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_runs == 0 {
            return Err(CliError::config("num_runs must be at least 1"));
        }
        self.train.validate().map_err(CliError::config)?;
        if let DataSource::Sbm(s) = &self.data {
            s.validate().map_err(CliError::config)?;
        }
        if let Some(n) = &self.noise {
            if !(n.ratio >= 0.0 && n.ratio.is_finite()) {
                return Err(CliError::config("noise.ratio must be finite and >= 0"));
            }
        }
        if self
            .robustness
            .ratios
            .iter()
            .any(|r| !(*r >= 0.0 && r.is_finite()))
        {
            return Err(CliError::config(
                "robustness.ratios must be finite and >= 0",
            ));
        }
        if self.homophily.num_bins == 0 || self.homophily.max_pairs == 0 {
            return Err(CliError::config(
                "homophily.num_bins and max_pairs must be at least 1",
            ));
        }
        let sc = &self.scaling;
        if sc.repetitions == 0
            || sc.k == 0
            || sc.anchors == 0
            || sc.num_blocks == 0
            || sc.feat_dim == 0
        {
            return Err(CliError::config("scaling counts must be at least 1"));
        }
        if sc.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config("scaling.sizes must be strictly ascending"));
        }
        if !(sc.mean_degree >= 0.0 && sc.mean_degree.is_finite()) {
            return Err(CliError::config(
                "scaling.mean_degree must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Seed of run `index`.
    pub fn run_seed(&self, index: usize) -> u64 {
        self.train.seed.wrapping_add(index as u64)
    }

    /// Training config of run `index`.
    pub fn run_train_config(&self, index: usize) -> TrainConfig {
        TrainConfig {
            seed: self.run_seed(index),
            ..self.train.clone()
        }
    }

    /// Noise applied in run `index`, with its own seed offset.
    pub fn run_noise(&self, index: usize) -> Option<NoiseSpec> {
        self.noise.map(|n| NoiseSpec {
            seed: n.seed.wrapping_add(index as u64),
            ..n
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
