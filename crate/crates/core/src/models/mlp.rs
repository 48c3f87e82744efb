//! Slice-conditioned two-layer MLP baseline.

use rand::Rng;

use crate::error::{shape_err, Result};
use crate::models::{global_mean_pool, global_mean_pool_backward, init};
use crate::numerics::{
    affine, affine_backward, affine_param_grads, rectify, rectify_backward, Matrix, ParamTensor,
};
use crate::scalar::Scalar;

/// Normalized slice positions `i / (n - 1)`.
pub fn slice_positions<T: Scalar>(n: usize) -> Vec<T> {
    let denom = T::from_usize(n.saturating_sub(1).max(1)).unwrap();
    (0..n).map(|i| T::from_usize(i).unwrap() / denom).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CondMlp<T> {
    pub w1: ParamTensor<T>,
    pub b1: ParamTensor<T>,
    pub w2: ParamTensor<T>,
    pub b2: ParamTensor<T>,
}

#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    input: Matrix<T>,
    z1: Matrix<T>,
    a1: Matrix<T>,
}

impl<T: Scalar> CondMlp<T> {
    /// `feat_dim` excludes the appended position column.
    pub fn new(feat_dim: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let b1 = 1.0 / ((feat_dim + 1) as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: ParamTensor::new(init::uniform(feat_dim + 1, hidden, b1, rng)),
            b1: ParamTensor::new(init::uniform(1, hidden, b1, rng)),
            w2: ParamTensor::new(init::uniform(hidden, classes, b2, rng)),
            b2: ParamTensor::new(init::uniform(1, classes, b2, rng)),
        }
    }

    pub fn num_parameters(feat_dim: usize, hidden: usize, classes: usize) -> usize {
        (feat_dim + 1) * hidden + hidden + hidden * classes + classes
    }

    /// Per-slice logits averaged over slices; row `i` is conditioned on `positions[i]`.
    pub fn forward_with_positions(
        &self,
        features: &Matrix<T>,
        positions: &[T],
    ) -> Result<(Vec<T>, MlpCache<T>)> {
        if positions.len() != features.rows() {
            return Err(shape_err(
                "cond_mlp_forward",
                format!("{} positions for {} slices", positions.len(), features.rows()),
            ));
        }
        let input = features.hstack(&Matrix::from_vec(positions.len(), 1, positions.to_vec())?)?;
        let z1 = affine(&input, &self.w1.value, &self.b1.value)?;
        let a1 = rectify(&z1, T::zero());
        let z2 = affine(&a1, &self.w2.value, &self.b2.value)?;
        let logits = global_mean_pool(&z2)?;
        Ok((logits, MlpCache { input, z1, a1 }))
    }

    pub fn forward(&self, features: &Matrix<T>) -> Result<(Vec<T>, MlpCache<T>)> {
        self.forward_with_positions(features, &slice_positions(features.rows()))
    }

    pub fn backward(&mut self, cache: &MlpCache<T>, dlogits: &[T]) -> Result<()> {
        let dz2 = global_mean_pool_backward(cache.a1.rows(), dlogits);
        let da1 = affine_backward(&cache.a1, &dz2, &mut self.w2, &mut self.b2)?;
        let dz1 = rectify_backward(&cache.z1, &da1, T::zero())?;
        affine_param_grads(&cache.input, &dz1, &mut self.w1, &mut self.b1)
    }

    pub fn params(&self) -> [&ParamTensor<T>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<T>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}
