use ndarray::{Array2, ArrayView2};

use crate::data::NormalizedOperator;
use crate::error::{Error, Result};
use crate::nn::{relu, relu_backward, Linear, LinearGrad};
use crate::scalar::{sigmoid, softplus, softplus_inv, Scalar};

pub const EMBED_HIDDEN: usize = 64;
pub const EMBED_DIM: usize = 32;
/// Lower bound added to the softplus so the kernel width stays positive.
pub const TEMPERATURE_FLOOR: f64 = 1e-4;

/// Two-layer perceptron `D_feat → 64 → 32` with a rectifier after the first
/// layer, plus the raw kernel temperature `τ` (`t = softplus(τ) + 1e-4`).
///
/// With `graph_conv` the first layer propagates over the observed graph
/// (`Â X W₁ + b₁`, `Â` the symmetric-normalized adjacency with self-loops).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet<T> {
    pub layer1: Linear<T>,
    pub layer2: Linear<T>,
    pub tau: T,
    pub graph_conv: bool,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EmbedCache<T> {
    input: Array2<T>,
    pre1: Array2<T>,
    hidden: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedGrad<T> {
    pub layer1: LinearGrad<T>,
    pub layer2: LinearGrad<T>,
    pub tau: T,
}

impl<T: Scalar> EmbeddingNet<T> {
    /// Glorot-initialized net with `t = 1`.
    pub fn new(feature_dim: usize, graph_conv: bool, seed: u64) -> Self {
        Self::with_dims(feature_dim, EMBED_HIDDEN, EMBED_DIM, graph_conv, seed)
    }

    pub fn with_dims(
        feature_dim: usize,
        hidden: usize,
        out: usize,
        graph_conv: bool,
        seed: u64,
    ) -> Self {
        Self {
            layer1: Linear::glorot(feature_dim, hidden, seed, 0),
            layer2: Linear::glorot(hidden, out, seed, 1),
            tau: softplus_inv(T::lit(1.0 - TEMPERATURE_FLOOR)),
            graph_conv,
        }
    }

    pub fn temperature(&self) -> T {
        softplus(self.tau) + T::lit(TEMPERATURE_FLOOR)
    }

    /// `dt/dτ`
    pub fn temperature_slope(&self) -> T {
        sigmoid(self.tau)
    }

    pub fn output_dim(&self) -> usize {
        self.layer2.fan_out()
    }

    pub fn embed(
        &self,
        x: ArrayView2<'_, T>,
        a0: Option<&NormalizedOperator<T>>,
    ) -> Result<Array2<T>> {
        Ok(self.forward(x, a0)?.0)
    }

    pub fn forward(
        &self,
        x: ArrayView2<'_, T>,
        a0: Option<&NormalizedOperator<T>>,
    ) -> Result<(Array2<T>, EmbedCache<T>)> {
        let input = match (self.graph_conv, a0) {
            (true, Some(op)) => {
                if op.dim() != x.nrows() {
                    return Err(Error::shape(
                        "embedding graph operator",
                        x.nrows(),
                        op.dim(),
                    ));
                }
                op.apply(x)?
            }
            (true, None) => {
                return Err(Error::InvalidArgument(
                    "graph-convolution embedding needs the observed graph".into(),
                ))
            }
            (false, _) => x.to_owned(),
        };
        let pre1 = self.layer1.forward(input.view(), "embedding layer 1")?;
        let hidden = relu(&pre1);
        let z = self.layer2.forward(hidden.view(), "embedding layer 2")?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "embeddings".into(),
            });
        }
        Ok((
            z,
            EmbedCache {
                input,
                pre1,
                hidden,
            },
        ))
    }

    /// Backpropagates `dL/dZ` and `dL/dt` into the parameters.
    pub fn backward(&self, cache: &EmbedCache<T>, dz: &Array2<T>, dt: T) -> EmbedGrad<T> {
        let (layer2, dh) = self.layer2.backward(cache.hidden.view(), dz.view(), true);
        let dpre1 = relu_backward(&cache.pre1, &dh.expect("dx requested"));
        let (layer1, _) = self
            .layer1
            .backward(cache.input.view(), dpre1.view(), false);
        EmbedGrad {
            layer1,
            layer2,
            tau: dt * self.temperature_slope(),
        }
    }

    /// Sign pattern of the rectifier inputs; used to detect kinks in
    /// finite-difference checks.
    pub fn activation_pattern(cache: &EmbedCache<T>) -> Vec<bool> {
        cache.pre1.iter().map(|&v| v > T::zero()).collect()
    }
}
