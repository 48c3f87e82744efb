//! GraphSAGE convolution with mean neighbor aggregation.

use std::marker::PhantomData;

use rand::Rng;

use crate::error::{shape_err, Result};
use crate::graph::EdgeSet;
use crate::models::init;
use crate::numerics::{gemm, Matrix, Op, ParamTensor};
use crate::scalar::Scalar;

/// Row `v` of the result is the mean of `h` over the neighbors of `v`
/// (zero for isolated nodes), summed in ascending neighbor order.
pub fn mean_aggregate<T: Scalar>(nbrs: &[Vec<usize>], h: &Matrix<T>) -> Result<Matrix<T>> {
    if nbrs.len() != h.rows() {
        return Err(shape_err(
            "mean_aggregate",
            format!("{} neighborhoods for {} rows", nbrs.len(), h.rows()),
        ));
    }
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for (v, list) in nbrs.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let dst = out.row_mut(v);
        for &u in list {
            for (a, &b) in dst.iter_mut().zip(h.row(u)) {
                *a += b;
            }
        }
        let inv = T::one() / T::from_usize(list.len()).unwrap();
        dst.iter_mut().for_each(|a| *a *= inv);
    }
    Ok(out)
}

/// Adjoint of [`mean_aggregate`]: scatters `d[v] / |N(v)|` onto each neighbor.
pub fn mean_aggregate_adjoint<T: Scalar>(nbrs: &[Vec<usize>], d: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(d.rows(), d.cols());
    for (v, list) in nbrs.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let inv = T::one() / T::from_usize(list.len()).unwrap();
        for &u in list {
            for (a, &b) in out.row_mut(u).iter_mut().zip(d.row(v)) {
                *a += inv * b;
            }
        }
    }
    out
}

/// `H'[v] = H[v]·W_root + mean_{u∈N(v)} H[u]·W_neigh + b`.
///
/// The neighbor mean is taken after the `W_neigh` transform, which is the
/// same map by linearity and touches `d_out` rather than `d_in` columns.
pub fn sage_layer_forward<T: Scalar>(
    edges: &EdgeSet,
    h: &Matrix<T>,
    w_root: &Matrix<T>,
    w_neigh: &Matrix<T>,
    bias: &Matrix<T>,
) -> Result<Matrix<T>> {
    combine(&edges.neighborhoods(), h, w_root, w_neigh, bias)
}

fn combine<T: Scalar>(
    nbrs: &[Vec<usize>],
    h: &Matrix<T>,
    w_root: &Matrix<T>,
    w_neigh: &Matrix<T>,
    bias: &Matrix<T>,
) -> Result<Matrix<T>> {
    if w_root.shape() != w_neigh.shape() {
        return Err(shape_err(
            "sage_layer_forward",
            format!("root {:?} vs neighbor {:?} weights", w_root.shape(), w_neigh.shape()),
        ));
    }
    let mut out = h.matmul(w_root)?;
    let projected = h.matmul(w_neigh)?;
    out.axpy(T::one(), &mean_aggregate(nbrs, &projected)?)?;
    out.add_row_broadcast(bias)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageLayer<T> {
    pub w_root: ParamTensor<T>,
    pub w_neigh: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

/// Forward state needed by [`SageLayer::backward`].
#[derive(Clone, Debug)]
pub struct SageCache<T> {
    _marker: PhantomData<T>,
}

impl<T: Scalar> SageLayer<T> {
    pub fn new(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Self {
            w_root: ParamTensor::new(init::uniform(d_in, d_out, bound, rng)),
            w_neigh: ParamTensor::new(init::uniform(d_in, d_out, bound, rng)),
            bias: ParamTensor::new(init::uniform(1, d_out, bound, rng)),
        }
    }

    pub fn num_parameters(d_in: usize, d_out: usize) -> usize {
        2 * d_in * d_out + d_out
    }

    pub fn forward(&self, nbrs: &[Vec<usize>], h: &Matrix<T>) -> Result<(Matrix<T>, SageCache<T>)> {
        let out = combine(nbrs, h, &self.w_root.value, &self.w_neigh.value, &self.bias.value)?;
        Ok((out, SageCache { _marker: PhantomData }))
    }

    /// Accumulates parameter gradients; returns `dL/dh` when `need_input_grad`.
    pub fn backward(
        &mut self,
        nbrs: &[Vec<usize>],
        h: &Matrix<T>,
        _cache: &SageCache<T>,
        dout: &Matrix<T>,
        need_input_grad: bool,
    ) -> Result<Option<Matrix<T>>> {
        // dL/d(h·W_neigh) = Mᵀ·dout
        let dprojected = mean_aggregate_adjoint(nbrs, dout);
        gemm(T::one(), h, Op::T, dout, Op::N, T::one(), &mut self.w_root.grad)?;
        gemm(T::one(), h, Op::T, &dprojected, Op::N, T::one(), &mut self.w_neigh.grad)?;
        self.bias.grad.axpy(T::one(), &dout.column_sums())?;
        if !need_input_grad {
            return Ok(None);
        }
        let mut dh = dout.matmul_t(&self.w_root.value)?;
        gemm(T::one(), &dprojected, Op::N, &self.w_neigh.value, Op::T, T::one(), &mut dh)?;
        Ok(Some(dh))
    }

    pub fn params(&self) -> [&ParamTensor<T>; 3] {
        [&self.w_root, &self.w_neigh, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<T>; 3] {
        [&mut self.w_root, &mut self.w_neigh, &mut self.bias]
    }
}
