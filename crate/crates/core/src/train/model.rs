use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::loss::{graph_loss_terms, prediction_loss_grad, reward, LossBreakdown, RewardVector};
use crate::data::{gcn_operator, GraphDataset, NormalizedOperator, Split};
use crate::error::{Error, Result};
use crate::learner::{
    default_anchor_count, gumbel_top_k, kernel_backward, node_anchor_probabilities,
    pairwise_probabilities, pass_probabilities, passing_operator, sample_anchors, AnchorSet,
    EmbedCache, EmbedGrad, EmbeddingNet, LatentGraph, ProbabilityMatrix, SampleMode,
};
use crate::mp::{
    predict, ClassifierHead, Dropout, GcnCache, GcnStack, Propagation, TwoStepOperator,
};
use crate::nn::LinearGrad;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// Node-node latent graph, GCN over it.
    #[serde(alias = "node_node")]
    Ppgnn,
    /// Node-anchor latent graph, two-step message passing.
    #[serde(alias = "anchor")]
    PpgnnAnchor,
    /// GCN over the observed graph.
    #[serde(alias = "gcn_baseline")]
    Gcn,
    /// Same stack with no propagation.
    #[serde(alias = "mlp_baseline")]
    Mlp,
}

impl ModelMode {
    pub const ALL: [ModelMode; 4] = [
        ModelMode::Ppgnn,
        ModelMode::PpgnnAnchor,
        ModelMode::Gcn,
        ModelMode::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::Ppgnn => "ppgnn",
            ModelMode::PpgnnAnchor => "ppgnn_anchor",
            ModelMode::Gcn => "gcn",
            ModelMode::Mlp => "mlp",
        }
    }

    pub fn learns_graph(self) -> bool {
        matches!(self, ModelMode::Ppgnn | ModelMode::PpgnnAnchor)
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppgnn" | "node_node" => Ok(ModelMode::Ppgnn),
            "ppgnn_anchor" | "anchor" => Ok(ModelMode::PpgnnAnchor),
            "gcn" | "gcn_baseline" => Ok(ModelMode::Gcn),
            "mlp" | "mlp_baseline" => Ok(ModelMode::Mlp),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected ppgnn, ppgnn_anchor, gcn or mlp)"
            ))),
        }
    }
}

/// Everything a trained model needs at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub mode: ModelMode,
    pub k: usize,
    pub embedding: Option<EmbeddingNet<T>>,
    pub anchors: Option<AnchorSet>,
    pub gcn: GcnStack<T>,
    pub head: ClassifierHead<T>,
}

/// Options fixed at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInit {
    pub mode: ModelMode,
    pub k: usize,
    /// Anchor count; `⌈N/10⌉` when `None`.
    pub anchors: Option<usize>,
    pub graph_conv: bool,
    pub seed: u64,
}

/// Fixed operators derived from the observed graph.
#[derive(Debug, Clone)]
pub struct GraphContext<T> {
    /// `D⁻¹(A⁽⁰⁾ + I)`
    pub passing: NormalizedOperator<T>,
    /// Symmetric-normalized `A⁽⁰⁾ + I`: GCN baseline and graph-conv embedding.
    pub observed: NormalizedOperator<T>,
}

impl<T: Scalar> GraphContext<T> {
    pub fn new(dataset: &GraphDataset<T>) -> Result<Self> {
        Ok(Self {
            passing: passing_operator(dataset.adjacency())?,
            observed: gcn_operator(dataset.adjacency())?,
        })
    }
}

/// Embeddings and score matrices for one forward pass of the graph learner.
#[derive(Debug, Clone)]
pub struct LearnerState<T> {
    pub z: Array2<T>,
    pub cache: EmbedCache<T>,
    pub t: T,
    pub raw: ProbabilityMatrix<T>,
    pub refined: ProbabilityMatrix<T>,
}

/// Where the per-node rewards come from in a step.
#[derive(Debug, Clone)]
pub enum RewardSource<T> {
    /// From this step's hard predictions on the training nodes.
    FromPredictions,
    /// Held fixed (gradient checks).
    Fixed(RewardVector<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub embedding: Option<EmbedGrad<T>>,
    pub gcn: Vec<LinearGrad<T>>,
    pub head: LinearGrad<T>,
}

#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub loss: LossBreakdown<T>,
    pub grads: ModelGrads<T>,
    pub reward: Option<RewardVector<T>>,
    pub logits: Array2<T>,
    pub predictions: Vec<usize>,
    /// Signs of every rectifier input in the stack. Finite-difference
    /// checks compare these to detect kinks.
    pub relu_pattern: Vec<bool>,
}

enum Mixing<T> {
    Graph(NormalizedOperator<T>),
    TwoStep(TwoStepOperator<T>),
    Observed,
    Identity,
}

impl<T: Scalar> Mixing<T> {
    fn propagation<'a>(&'a self, ctx: &'a GraphContext<T>) -> Propagation<'a, T> {
        match self {
            Mixing::Graph(op) => Propagation::Graph(op),
            Mixing::TwoStep(op) => Propagation::TwoStep(op),
            Mixing::Observed => Propagation::Graph(&ctx.observed),
            Mixing::Identity => Propagation::Identity,
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(dataset: &GraphDataset<T>, init: ModelInit) -> Result<Self> {
        let n = dataset.num_nodes();
        let feat = dataset.feature_dim();
        let learns = init.mode.learns_graph();
        let anchors = if init.mode == ModelMode::PpgnnAnchor {
            let s = init.anchors.unwrap_or_else(|| default_anchor_count(n));
            Some(sample_anchors(n, s, init.seed)?)
        } else {
            None
        };
        if learns {
            let cols = anchors.as_ref().map_or(n, |a| a.len());
            if init.k == 0 || init.k > cols {
                return Err(Error::InvalidArgument(format!(
                    "k = {} must be in [1, {cols}]",
                    init.k
                )));
            }
        }
        let gcn = GcnStack::new(feat, init.seed);
        let head = ClassifierHead::new(gcn.output_dim(), dataset.num_classes(), init.seed);
        Ok(Self {
            mode: init.mode,
            k: init.k,
            embedding: learns.then(|| EmbeddingNet::new(feat, init.graph_conv, init.seed)),
            anchors,
            gcn,
            head,
        })
    }

    /// Embeds the nodes and builds raw and refined score matrices.
    pub fn learn_graph(
        &self,
        ctx: &GraphContext<T>,
        x: ArrayView2<'_, T>,
    ) -> Result<Option<LearnerState<T>>> {
        let Some(net) = &self.embedding else {
            return Ok(None);
        };
        let (z, cache) = net.forward(x, Some(&ctx.observed))?;
        let t = net.temperature();
        let raw = match &self.anchors {
            Some(anchors) => node_anchor_probabilities(z.view(), anchors, t)?,
            None => pairwise_probabilities(z.view(), t)?,
        };
        let refined = pass_probabilities(&ctx.passing, &raw)?;
        Ok(Some(LearnerState {
            z,
            cache,
            t,
            raw,
            refined,
        }))
    }

    pub fn sample(
        &self,
        learner: &LearnerState<T>,
        mode: SampleMode,
        seed: u64,
    ) -> Result<LatentGraph> {
        gumbel_top_k(&learner.refined, self.k, mode, seed)
    }

    fn mixing(&self, latent: Option<&LatentGraph>) -> Result<Mixing<T>> {
        Ok(match (self.mode, latent) {
            (ModelMode::Ppgnn, Some(g)) => Mixing::Graph(gcn_operator(g.structure())?),
            (ModelMode::PpgnnAnchor, Some(g)) => Mixing::TwoStep(TwoStepOperator::new(g)?),
            (ModelMode::Gcn, _) => Mixing::Observed,
            (ModelMode::Mlp, _) => Mixing::Identity,
            (mode, None) => {
                return Err(Error::InvalidArgument(format!(
                    "mode {mode} needs a latent graph"
                )))
            }
        })
    }

    fn propagate(
        &self,
        ctx: &GraphContext<T>,
        mixing: &Mixing<T>,
        x: ArrayView2<'_, T>,
        dropout: Option<Dropout>,
    ) -> Result<(Array2<T>, GcnCache<T>, Array2<T>)> {
        let (u, cache) = self.gcn.forward(mixing.propagation(ctx), x, dropout)?;
        let logits = self.head.linear.forward(u.view(), "classifier head")?;
        Ok((u, cache, logits))
    }

    /// Logits over all nodes for a given latent graph (ignored by baselines).
    pub fn logits(
        &self,
        ctx: &GraphContext<T>,
        x: ArrayView2<'_, T>,
        latent: Option<&LatentGraph>,
    ) -> Result<Array2<T>> {
        let mixing = self.mixing(latent)?;
        Ok(self.propagate(ctx, &mixing, x, None)?.2)
    }

    /// Deterministic-graph logits.
    pub fn infer(&self, ctx: &GraphContext<T>, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let latent = match self.learn_graph(ctx, x)? {
            Some(state) => Some(self.sample(&state, SampleMode::Deterministic, 0)?),
            None => None,
        };
        self.logits(ctx, x, latent.as_ref())
    }

    /// Losses and analytic gradients for one step on a fixed latent graph.
    ///
    /// The embedding net and temperature only see `L_G`; the stack and the
    /// head only see `L_pred`.
    pub fn loss_and_gradients(
        &self,
        ctx: &GraphContext<T>,
        dataset: &GraphDataset<T>,
        learner: Option<&LearnerState<T>>,
        latent: Option<&LatentGraph>,
        rewards: RewardSource<T>,
        dropout: Option<Dropout>,
    ) -> Result<StepOutput<T>> {
        let x = dataset.features().view();
        let train = dataset.split(Split::Train);
        let mixing = self.mixing(latent)?;
        let (u, cache, logits) = self.propagate(ctx, &mixing, x, dropout)?;
        let predictions = predict(&logits);
        let (l_pred, dlogits) = prediction_loss_grad(&logits, dataset.labels(), train)?;

        let (head_grad, du) = self.head.linear.backward(u.view(), dlogits.view(), true);
        let gcn_grads =
            self.gcn
                .backward(mixing.propagation(ctx), &cache, &du.expect("dx requested"))?;

        let (l_graph, embedding, reward_used) = match (&self.embedding, learner, latent) {
            (Some(net), Some(state), Some(latent)) => {
                let delta = match rewards {
                    RewardSource::FromPredictions => reward(dataset.labels(), &predictions, train)?,
                    RewardSource::Fixed(d) => d,
                };
                let (l_graph, score_grad) = graph_loss_terms(&delta, &state.refined, latent)?;
                let (dz, dt) = kernel_backward(
                    state.z.view(),
                    state.t,
                    &state.raw,
                    self.anchors.as_ref(),
                    &ctx.passing,
                    &score_grad,
                );
                (
                    l_graph,
                    Some(net.backward(&state.cache, &dz, dt)),
                    Some(delta),
                )
            }
            (None, _, _) => (T::zero(), None, None),
            _ => {
                return Err(Error::InvalidArgument(
                    "graph-learning modes need the learner state and latent graph".into(),
                ))
            }
        };

        let loss = LossBreakdown::new(l_pred, l_graph);
        if !loss.total.is_finite() {
            return Err(Error::NonFinite {
                context: "loss".into(),
            });
        }
        Ok(StepOutput {
            loss,
            grads: ModelGrads {
                embedding,
                gcn: gcn_grads,
                head: head_grad,
            },
            reward: reward_used,
            logits,
            predictions,
            relu_pattern: cache.activation_pattern(),
        })
    }

    /// Named flat views of every trainable tensor.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        if let Some(net) = &mut self.embedding {
            out.push(("embed.0.weight".into(), slice_mut(&mut net.layer1.weight)));
            out.push((
                "embed.0.bias".into(),
                net.layer1.bias.as_slice_mut().expect("contiguous"),
            ));
            out.push(("embed.1.weight".into(), slice_mut(&mut net.layer2.weight)));
            out.push((
                "embed.1.bias".into(),
                net.layer2.bias.as_slice_mut().expect("contiguous"),
            ));
            out.push(("embed.tau".into(), std::slice::from_mut(&mut net.tau)));
        }
        for (l, layer) in self.gcn.layers.iter_mut().enumerate() {
            out.push((format!("gcn.{l}.weight"), slice_mut(&mut layer.weight)));
            out.push((
                format!("gcn.{l}.bias"),
                layer.bias.as_slice_mut().expect("contiguous"),
            ));
        }
        out.push((
            "head.weight".into(),
            slice_mut(&mut self.head.linear.weight),
        ));
        out.push((
            "head.bias".into(),
            self.head.linear.bias.as_slice_mut().expect("contiguous"),
        ));
        out
    }

    pub fn tensor_mut(&mut self, name: &str) -> Result<&mut [T]> {
        self.tensors_mut()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::NotAParameter(name.to_string()))
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.clone()
            .tensors_mut()
            .into_iter()
            .map(|(n, _)| n)
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.clone()
            .tensors_mut()
            .iter()
            .map(|(_, s)| s.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.clone()
            .tensors_mut()
            .iter()
            .all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }
}

fn slice_mut<T>(a: &mut Array2<T>) -> &mut [T] {
    a.as_slice_mut().expect("standard layout")
}

fn slice<T>(a: &Array2<T>) -> &[T] {
    a.as_slice().expect("standard layout")
}

impl<T: Scalar> ModelGrads<T> {
    /// Same names and order as [`ModelParams::tensors_mut`].
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        if let Some(g) = &self.embedding {
            out.push(("embed.0.weight".into(), slice(&g.layer1.weight)));
            out.push((
                "embed.0.bias".into(),
                g.layer1.bias.as_slice().expect("contiguous"),
            ));
            out.push(("embed.1.weight".into(), slice(&g.layer2.weight)));
            out.push((
                "embed.1.bias".into(),
                g.layer2.bias.as_slice().expect("contiguous"),
            ));
            out.push(("embed.tau".into(), std::slice::from_ref(&g.tau)));
        }
        for (l, layer) in self.gcn.iter().enumerate() {
            out.push((format!("gcn.{l}.weight"), slice(&layer.weight)));
            out.push((
                format!("gcn.{l}.bias"),
                layer.bias.as_slice().expect("contiguous"),
            ));
        }
        out.push(("head.weight".into(), slice(&self.head.weight)));
        out.push((
            "head.bias".into(),
            self.head.bias.as_slice().expect("contiguous"),
        ));
        out
    }

    pub fn get(&self, name: &str) -> Result<&[T]> {
        self.tensors()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::NotAParameter(name.to_string()))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }
}
