use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// A trainable weight together with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor<T = f64> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Exponential per-epoch learning-rate decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub decay_per_epoch: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial_lr: 1e-3,
            decay_per_epoch: 0.995,
        }
    }
}

impl LrSchedule {
    pub fn new(initial_lr: f64, decay_per_epoch: f64) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial learning rate {initial_lr} must be positive")));
        }
        if !(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0) {
            return Err(Error::Config(format!("lr decay {decay_per_epoch} must lie in (0, 1]")));
        }
        Ok(Self {
            initial_lr,
            decay_per_epoch,
        })
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.initial_lr * self.decay_per_epoch.powi(epoch as i32)
    }
}

/// One plain SGD update with L2 weight decay folded into the gradient:
/// `p <- p - lr * (grad + weight_decay * p)`, then gradients are zeroed.
///
/// Nothing is modified if any gradient is non-finite.
pub fn sgd_step<'a, T: Scalar>(
    params: impl IntoIterator<Item = &'a mut ParamTensor<T>>,
    lr: T,
    weight_decay: T,
) -> Result<()> {
    let mut params: Vec<_> = params.into_iter().collect();
    if let Some(i) = params.iter().position(|p| !p.grad.all_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter tensor {i}")));
    }
    for p in params.iter_mut() {
        for (v, g) in p.value.as_mut_slice().iter_mut().zip(p.grad.as_mut_slice()) {
            *v -= lr * (*g + weight_decay * *v);
            *g = T::zero();
        }
    }
    Ok(())
}
