use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::anchor::TwoStepOperator;
use crate::data::NormalizedOperator;
use crate::error::{Error, Result};
use crate::nn::{relu, relu_backward, Linear, LinearGrad};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

pub const GCN_HIDDEN: usize = 64;
pub const GCN_LAYERS: usize = 3;

/// How node features are mixed before each layer's linear map.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a, T> {
    /// Normalized sparse operator (GCN over a node-node graph).
    Graph(&'a NormalizedOperator<T>),
    /// Aggregate to anchors, broadcast back.
    TwoStep(&'a TwoStepOperator<T>),
    /// No mixing; the stack degenerates to a per-node perceptron.
    Identity,
}

impl<T: Scalar> Propagation<'_, T> {
    pub fn apply(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        match self {
            Propagation::Graph(op) => {
                if op.dim() != x.nrows() {
                    return Err(Error::shape("gcn operator", op.dim(), x.nrows()));
                }
                op.apply(x)
            }
            Propagation::TwoStep(op) => op.apply(x),
            Propagation::Identity => Ok(x.to_owned()),
        }
    }

    pub fn apply_transpose(&self, g: ArrayView2<'_, T>) -> Result<Array2<T>> {
        match self {
            Propagation::Graph(op) => op.apply_transpose(g),
            Propagation::TwoStep(op) => op.apply_transpose(g),
            Propagation::Identity => Ok(g.to_owned()),
        }
    }
}

/// Inverted dropout on every layer input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

/// `L` propagation layers `U⁽ˡ⁾ = ReLU(prop(U⁽ˡ⁻¹⁾) W⁽ˡ⁾ + b⁽ˡ⁾)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnStack<T> {
    pub layers: Vec<Linear<T>>,
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    mask: Option<Array2<T>>,
    mixed: Array2<T>,
    pre: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct GcnCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> GcnCache<T> {
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| l.pre.iter().map(|&v| v > T::zero()))
            .collect()
    }
}

impl<T: Scalar> GcnStack<T> {
    /// `input_dim → 64 → 64 → 64`, Glorot initialized.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self::with_widths(&[input_dim, GCN_HIDDEN, GCN_HIDDEN, GCN_HIDDEN], seed)
    }

    pub fn with_widths(widths: &[usize], seed: u64) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| Linear::glorot(w[0], w[1], seed, 10 + l as u64))
            .collect();
        Self { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out())
    }

    pub fn forward(
        &self,
        propagation: Propagation<'_, T>,
        x: ArrayView2<'_, T>,
        dropout: Option<Dropout>,
    ) -> Result<(Array2<T>, GcnCache<T>)> {
        let mut u = x.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            if u.ncols() != layer.fan_in() {
                return Err(Error::shape("gcn layer width", layer.fan_in(), u.ncols()));
            }
            let mask = dropout.filter(|d| d.rate > 0.0).map(|d| {
                let mut rng = stream(d.seed, Purpose::Dropout, l as u64);
                let keep = T::lit(1.0 / (1.0 - d.rate));
                Array2::from_shape_simple_fn(u.raw_dim(), || {
                    if rng.random::<f64>() < d.rate {
                        T::zero()
                    } else {
                        keep
                    }
                })
            });
            if let Some(m) = &mask {
                u = u * m;
            }
            let mixed = propagation.apply(u.view())?;
            let pre = layer.forward(mixed.view(), "gcn layer")?;
            u = relu(&pre);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("gcn layer {l} activations"),
                });
            }
            caches.push(LayerCache { mask, mixed, pre });
        }
        Ok((u, GcnCache { layers: caches }))
    }

    pub fn backward(
        &self,
        propagation: Propagation<'_, T>,
        cache: &GcnCache<T>,
        d_out: &Array2<T>,
    ) -> Result<Vec<LinearGrad<T>>> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut du = d_out.clone();
        for (l, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let dpre = relu_backward(&c.pre, &du);
            let (grad, dmixed) = layer.backward(c.mixed.view(), dpre.view(), l > 0);
            grads.push(grad);
            if let Some(dmixed) = dmixed {
                du = propagation.apply_transpose(dmixed.view())?;
                if let Some(m) = &c.mask {
                    du = du * m;
                }
            }
        }
        grads.reverse();
        Ok(grads)
    }
}

/// GCN forward without dropout.
pub fn gcn_forward<T: Scalar>(
    stack: &GcnStack<T>,
    operator: &NormalizedOperator<T>,
    x: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    Ok(stack.forward(Propagation::Graph(operator), x, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{degree_normalize, gcn_operator, Normalization, SparseAdjacency};
    use ndarray::array;

    #[test]
    fn identity_operator_and_weights_pass_nonnegative_input() {
        let mut stack = GcnStack::<f64>::with_widths(&[3, 3, 3], 0);
        for layer in &mut stack.layers {
            layer.weight = Array2::eye(3);
        }
        let op = degree_normalize(
            &SparseAdjacency::identity(2),
            Normalization::Symmetric,
            false,
        )
        .unwrap();
        let x = array![[0.0, 1.0, 2.0], [3.0, 0.5, 0.0]];
        assert_eq!(gcn_forward(&stack, &op, x.view()).unwrap(), x);
    }

    #[test]
    fn twin_nodes_get_identical_rows() {
        // 0 and 1 both connect to 2 and 3 only
        let a =
            SparseAdjacency::from_undirected_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let op = gcn_operator::<f64>(&a).unwrap();
        let x = array![[1.0, 2.0], [1.0, 2.0], [0.0, 1.0], [5.0, -1.0]];
        let out = gcn_forward(&GcnStack::new(2, 3), &op, x.view()).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn width_mismatch() {
        let op = gcn_operator::<f64>(&SparseAdjacency::identity(2)).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(
            gcn_forward(&GcnStack::new(3, 0), &op, x.view()),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn dropout_is_seeded_and_rescaled() {
        let stack = GcnStack::<f64>::with_widths(&[4, 4], 1);
        let x = Array2::from_elem((50, 4), 1.0);
        let d = Some(Dropout { rate: 0.5, seed: 9 });
        let (a, ca) = stack.forward(Propagation::Identity, x.view(), d).unwrap();
        let (b, _) = stack.forward(Propagation::Identity, x.view(), d).unwrap();
        assert_eq!(a, b);
        let mask = ca.layers[0].mask.as_ref().unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        assert!(mask.iter().any(|&m| m == 0.0));
    }
}
