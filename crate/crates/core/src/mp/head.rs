use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::nn::Linear;
use crate::scalar::Scalar;

/// Affine map from the last propagation layer to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T> {
    pub linear: Linear<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn new(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            linear: Linear::glorot(input_dim, num_classes, seed, 20),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.linear.fan_out()
    }
}

pub fn classify<T: Scalar>(
    head: &ClassifierHead<T>,
    u_final: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    head.linear.forward(u_final, "classifier head")
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict<T: Scalar>(logits: &Array2<T>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_head_predicts_class_zero() {
        let head = ClassifierHead {
            linear: Linear::<f64>::zeros(4, 3),
        };
        let logits = classify(&head, Array2::from_elem((2, 4), 0.7).view()).unwrap();
        assert_eq!(logits, Array2::<f64>::zeros((2, 3)));
        assert_eq!(predict(&logits), vec![0, 0]);
    }

    #[test]
    fn selecting_weights_copy_columns() {
        let mut head = ClassifierHead {
            linear: Linear::<f64>::zeros(3, 2),
        };
        head.linear.weight[(2, 0)] = 1.0;
        head.linear.weight[(0, 1)] = 1.0;
        let u = array![[1.0, 2.0, 3.0], [-4.0, 5.0, 6.0]];
        assert_eq!(
            classify(&head, u.view()).unwrap(),
            array![[3.0, 1.0], [6.0, -4.0]]
        );
    }

    #[test]
    fn width_mismatch() {
        let head = ClassifierHead::<f64>::new(3, 2, 0);
        assert!(classify(&head, Array2::zeros((1, 4)).view()).is_err());
    }
}
