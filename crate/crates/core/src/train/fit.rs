use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::accuracy;
use super::model::{GraphContext, ModelInit, ModelMode, ModelParams, RewardSource};
use crate::data::{GraphDataset, Split};
use crate::error::{Error, Result};
use crate::learner::SampleMode;
use crate::mp::{predict, Dropout};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: ModelMode,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub k: usize,
    /// Anchor count for `ppgnn_anchor`; `⌈N/10⌉` when absent.
    pub anchors: Option<usize>,
    pub seed: u64,
    /// Latent-graph sampling during training. Evaluation is always deterministic.
    pub train_sampling: SampleMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    /// Graph-convolution first layer in the embedding net.
    pub graph_conv: bool,
    /// Record per-epoch wall time. Off by default so traces are byte-stable.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: ModelMode::Ppgnn,
            learning_rate: 5e-3,
            max_epochs: 300,
            patience: 50,
            k: 4,
            anchors: None,
            seed: 0,
            train_sampling: SampleMode::Stochastic,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            dropout: 0.0,
            graph_conv: false,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.anchors == Some(0) {
            return bad("anchors must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn model_init(&self) -> ModelInit {
        ModelInit {
            mode: self.mode,
            k: self.k,
            anchors: self.anchors,
            graph_conv: self.graph_conv,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_pred: f64,
    pub l_graph: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    /// Parameters at the best validation epoch.
    pub params: ModelParams<T>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_acc: f64,
    pub test_acc: f64,
}

/// Accuracy on a split with the deterministic latent graph.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    dataset: &GraphDataset<T>,
    split: Split,
) -> Result<f64> {
    let ctx = GraphContext::new(dataset)?;
    evaluate_with(params, &ctx, dataset, split)
}

pub fn evaluate_with<T: Scalar>(
    params: &ModelParams<T>,
    ctx: &GraphContext<T>,
    dataset: &GraphDataset<T>,
    split: Split,
) -> Result<f64> {
    let logits = params.infer(ctx, dataset.features().view())?;
    accuracy(dataset.labels(), &predict(&logits), dataset.split(split))
}

fn diverged(epoch: usize, err: Error) -> Error {
    if err.is_numerical() {
        Error::Diverged {
            epoch,
            context: err.to_string(),
        }
    } else {
        err
    }
}

/// Trains from a fresh initialization.
pub fn fit<T: Scalar>(dataset: &GraphDataset<T>, config: &TrainConfig) -> Result<FitResult<T>> {
    config.validate()?;
    let params = ModelParams::init(dataset, config.model_init())?;
    fit_from(dataset, config, params)
}

/// Trains starting from `params`; the returned parameters are those with
/// the best validation accuracy (the initial ones if no epoch ran).
pub fn fit_from<T: Scalar>(
    dataset: &GraphDataset<T>,
    config: &TrainConfig,
    mut params: ModelParams<T>,
) -> Result<FitResult<T>> {
    config.validate()?;
    if dataset.split(Split::Train).is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let ctx = GraphContext::new(dataset)?;
    let x = dataset.features().view();
    let labels = dataset.labels();
    let mut adam = Adam::new(
        T::lit(config.learning_rate),
        T::lit(config.beta1),
        T::lit(config.beta2),
        T::lit(config.epsilon),
        T::lit(config.weight_decay),
    );

    let mut best = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let mut epochs = Vec::new();

    for epoch in 0..config.max_epochs {
        let started = Instant::now();
        let step_seed = derive_seed(config.seed, epoch as u64);
        let step = (|| {
            let learner = params.learn_graph(&ctx, x)?;
            let latent = match &learner {
                Some(state) => Some(params.sample(state, config.train_sampling, step_seed)?),
                None => None,
            };
            let dropout = (config.dropout > 0.0).then_some(Dropout {
                rate: config.dropout,
                seed: step_seed,
            });
            params.loss_and_gradients(
                &ctx,
                dataset,
                learner.as_ref(),
                latent.as_ref(),
                RewardSource::FromPredictions,
                dropout,
            )
        })()
        .map_err(|e| diverged(epoch, e))?;

        if !step.grads.is_finite() {
            return Err(Error::Diverged {
                epoch,
                context: "non-finite gradient".into(),
            });
        }
        let grads = step.grads.tensors();
        let (_, slices): (Vec<String>, Vec<&mut [T]>) = params.tensors_mut().into_iter().unzip();
        adam.step(slices, grads.into_iter().map(|(_, g)| g).collect());
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                context: "non-finite parameters after update".into(),
            });
        }

        let logits = params.infer(&ctx, x).map_err(|e| diverged(epoch, e))?;
        let predictions = predict(&logits);
        let train_acc = accuracy(labels, &predictions, dataset.split(Split::Train))?;
        let val_nodes = dataset.split(Split::Val);
        let val_acc = if val_nodes.is_empty() {
            train_acc
        } else {
            accuracy(labels, &predictions, val_nodes)?
        };
        epochs.push(EpochRecord {
            epoch,
            l_pred: step.loss.l_pred.to_f64_lossy(),
            l_graph: step.loss.l_graph.to_f64_lossy(),
            train_acc,
            val_acc,
            wall_ms: config
                .record_wall_time
                .then(|| started.elapsed().as_secs_f64() * 1e3),
        });

        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = Some(epoch);
            best = params.clone();
        } else if best_epoch.is_some_and(|b| epoch - b >= config.patience) {
            break;
        }
    }

    let test_nodes = dataset.split(Split::Test);
    let test_acc = if test_nodes.is_empty() {
        f64::NAN
    } else {
        evaluate_with(&best, &ctx, dataset, Split::Test)?
    };
    Ok(FitResult {
        params: best,
        epochs,
        best_epoch,
        best_val_acc: best_val,
        test_acc,
    })
}
