//! Dense affine layers with hand-written backward passes.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

/// `y = x W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// Glorot-uniform weights, zero bias. `layer_id` picks the RNG stream.
    pub fn glorot(fan_in: usize, fan_out: usize, seed: u64, layer_id: u64) -> Self {
        let mut rng = stream(seed, Purpose::Init, layer_id);
        let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || {
            T::lit(rng.random_range(-limit..limit))
        });
        Self {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, T>, context: &'static str) -> Result<Array2<T>> {
        if x.ncols() != self.fan_in() {
            return Err(Error::shape(context, self.fan_in(), x.ncols()));
        }
        Ok(x.dot(&self.weight) + &self.bias)
    }

    /// Gradients for `y = x W + b` given `dy`; returns `(grad, dx)`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, T>,
        dy: ArrayView2<'_, T>,
        need_dx: bool,
    ) -> (LinearGrad<T>, Option<Array2<T>>) {
        let grad = LinearGrad {
            weight: x.t().dot(&dy),
            bias: dy.sum_axis(Axis(0)),
        };
        let dx = need_dx.then(|| dy.dot(&self.weight.t()));
        (grad, dx)
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }
}

impl<T: Scalar> LinearGrad<T> {
    pub fn zeros_like(layer: &Linear<T>) -> Self {
        Self {
            weight: Array2::zeros(layer.weight.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }
}

pub fn relu<T: Scalar>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// `dy ⊙ 1[pre > 0]`
pub fn relu_backward<T: Scalar>(pre: &Array2<T>, dy: &Array2<T>) -> Array2<T> {
    let mut out = dy.clone();
    out.zip_mut_with(pre, |d, &p| {
        if p <= T::zero() {
            *d = T::zero();
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let a = Linear::<f64>::glorot(10, 6, 3, 0);
        assert_eq!(a, Linear::glorot(10, 6, 3, 0));
        assert_ne!(a, Linear::glorot(10, 6, 3, 1));
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(a.weight.iter().all(|w| w.abs() < limit));
    }

    #[test]
    fn backward_matches_hand_derivation() {
        let layer = Linear {
            weight: array![[1.0, 2.0], [3.0, 4.0]],
            bias: array![0.5, -0.5],
        };
        let x = array![[1.0, -1.0]];
        let dy = array![[1.0, 2.0]];
        let (g, dx) = layer.backward(x.view(), dy.view(), true);
        assert_eq!(g.weight, array![[1.0, 2.0], [-1.0, -2.0]]);
        assert_eq!(g.bias, array![1.0, 2.0]);
        assert_eq!(dx.unwrap(), array![[5.0, 11.0]]);
    }
}
