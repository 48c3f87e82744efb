//! Single-head graph attention convolution.

use rand::Rng;

use crate::error::{shape_err, Result};
use crate::graph::EdgeSet;
use crate::models::init;
use crate::numerics::{
    gemm, masked_softmax, masked_softmax_backward, Mask, Matrix, Op, ParamTensor,
};
use crate::scalar::Scalar;

/// Attention coefficients over each closed neighborhood (self-loop added).
///
/// Score of target `v` attending to source `u` is
/// `LeakyReLU(a_src·z[v] + a_dst·z[u])` with `z = h·W`.
fn attention<T: Scalar>(
    mask: &Mask,
    z: &Matrix<T>,
    a_src: &Matrix<T>,
    a_dst: &Matrix<T>,
    slope: T,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let n = z.rows();
    let s_src = z.matmul_t(a_src)?;
    let s_dst = z.matmul_t(a_dst)?;
    let mut pre = Matrix::zeros(n, n);
    let mut scores = Matrix::zeros(n, n);
    for v in 0..n {
        for u in 0..n {
            if mask.get(v, u) {
                let p = s_src[(v, 0)] + s_dst[(u, 0)];
                pre[(v, u)] = p;
                scores[(v, u)] = if p > T::zero() { p } else { slope * p };
            }
        }
    }
    Ok((pre, masked_softmax(&scores, mask)?))
}

fn check_shapes<T: Scalar>(
    w: &Matrix<T>,
    a_src: &Matrix<T>,
    a_dst: &Matrix<T>,
    bias: &Matrix<T>,
) -> Result<()> {
    let d = w.cols();
    for (name, m) in [("a_src", a_src), ("a_dst", a_dst), ("bias", bias)] {
        if m.shape() != (1, d) {
            return Err(shape_err(
                "gat_layer_forward",
                format!("{name} {:?} for output width {d}", m.shape()),
            ));
        }
    }
    Ok(())
}

/// `H'[v] = Σ_{u ∈ N(v) ∪ {v}} α_vu · (H[u]·W) + b`.
pub fn gat_layer_forward<T: Scalar>(
    edges: &EdgeSet,
    h: &Matrix<T>,
    w: &Matrix<T>,
    a_src: &Matrix<T>,
    a_dst: &Matrix<T>,
    bias: &Matrix<T>,
    negative_slope: T,
) -> Result<Matrix<T>> {
    check_shapes(w, a_src, a_dst, bias)?;
    let z = h.matmul(w)?;
    let (_, alpha) = attention(&edges.closed_mask(), &z, a_src, a_dst, negative_slope)?;
    let mut out = alpha.matmul(&z)?;
    out.add_row_broadcast(bias)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatLayer<T> {
    pub w: ParamTensor<T>,
    pub a_src: ParamTensor<T>,
    pub a_dst: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

#[derive(Clone, Debug)]
pub struct GatCache<T> {
    z: Matrix<T>,
    pre: Matrix<T>,
    alpha: Matrix<T>,
}

impl<T: Scalar> GatCache<T> {
    pub fn attention(&self) -> &Matrix<T> {
        &self.alpha
    }
}

impl<T: Scalar> GatLayer<T> {
    pub fn new(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let w_bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let a_bound = (6.0 / (1 + d_out) as f64).sqrt();
        Self {
            w: ParamTensor::new(init::uniform(d_in, d_out, w_bound, rng)),
            a_src: ParamTensor::new(init::uniform(1, d_out, a_bound, rng)),
            a_dst: ParamTensor::new(init::uniform(1, d_out, a_bound, rng)),
            bias: ParamTensor::zeros(1, d_out),
        }
    }

    pub fn num_parameters(d_in: usize, d_out: usize) -> usize {
        d_in * d_out + 3 * d_out
    }

    pub fn forward(&self, mask: &Mask, h: &Matrix<T>, slope: T) -> Result<(Matrix<T>, GatCache<T>)> {
        check_shapes(&self.w.value, &self.a_src.value, &self.a_dst.value, &self.bias.value)?;
        let z = h.matmul(&self.w.value)?;
        let (pre, alpha) = attention(mask, &z, &self.a_src.value, &self.a_dst.value, slope)?;
        let mut out = alpha.matmul(&z)?;
        out.add_row_broadcast(&self.bias.value)?;
        Ok((out, GatCache { z, pre, alpha }))
    }

    pub fn backward(
        &mut self,
        mask: &Mask,
        h: &Matrix<T>,
        cache: &GatCache<T>,
        dout: &Matrix<T>,
        slope: T,
        need_input_grad: bool,
    ) -> Result<Option<Matrix<T>>> {
        let n = h.rows();
        let GatCache { z, pre, alpha } = cache;
        self.bias.grad.axpy(T::one(), &dout.column_sums())?;

        let mut dz = alpha.t_matmul(dout)?;
        let dalpha = dout.matmul_t(z)?;
        let dscores = masked_softmax_backward(alpha, &dalpha)?;

        let mut ds_src = Matrix::zeros(n, 1);
        let mut ds_dst = Matrix::zeros(n, 1);
        for v in 0..n {
            for u in 0..n {
                if !mask.get(v, u) {
                    continue;
                }
                let g = dscores[(v, u)];
                let g = if pre[(v, u)] > T::zero() { g } else { slope * g };
                ds_src[(v, 0)] += g;
                ds_dst[(u, 0)] += g;
            }
        }
        gemm(T::one(), &ds_src, Op::N, &self.a_src.value, Op::N, T::one(), &mut dz)?;
        gemm(T::one(), &ds_dst, Op::N, &self.a_dst.value, Op::N, T::one(), &mut dz)?;
        gemm(T::one(), &ds_src, Op::T, z, Op::N, T::one(), &mut self.a_src.grad)?;
        gemm(T::one(), &ds_dst, Op::T, z, Op::N, T::one(), &mut self.a_dst.grad)?;
        gemm(T::one(), h, Op::T, &dz, Op::N, T::one(), &mut self.w.grad)?;
        if need_input_grad {
            Ok(Some(dz.matmul_t(&self.w.value)?))
        } else {
            Ok(None)
        }
    }

    pub fn params(&self) -> [&ParamTensor<T>; 4] {
        [&self.w, &self.a_src, &self.a_dst, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<T>; 4] {
        [&mut self.w, &mut self.a_src, &mut self.a_dst, &mut self.bias]
    }
}
