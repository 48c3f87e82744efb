use crate::error::{shape_err, Error, Result};
use crate::numerics::{gemm, Matrix, Op, ParamTensor};
use crate::scalar::Scalar;

/// `x · W + b` with the bias broadcast over rows.
pub fn affine<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(shape_err(
            "affine",
            format!("bias {:?} for weight {:?}", b.shape(), w.shape()),
        ));
    }
    let mut out = x.matmul(w)?;
    out.add_row_broadcast(b)?;
    Ok(out)
}

/// Accumulates `xᵀ·dout` into `w.grad` and the column sums of `dout` into `b.grad`.
pub fn affine_param_grads<T: Scalar>(
    x: &Matrix<T>,
    dout: &Matrix<T>,
    w: &mut ParamTensor<T>,
    b: &mut ParamTensor<T>,
) -> Result<()> {
    gemm(T::one(), x, Op::T, dout, Op::N, T::one(), &mut w.grad)?;
    b.grad.axpy(T::one(), &dout.column_sums())?;
    Ok(())
}

/// Backward of [`affine`]: accumulates parameter gradients, returns `dL/dx`.
pub fn affine_backward<T: Scalar>(
    x: &Matrix<T>,
    dout: &Matrix<T>,
    w: &mut ParamTensor<T>,
    b: &mut ParamTensor<T>,
) -> Result<Matrix<T>> {
    affine_param_grads(x, dout, w, b)?;
    dout.matmul_t(&w.value)
}

/// Elementwise `max(x, slope·x)`; `slope = 0` is ReLU.
pub fn rectify<T: Scalar>(x: &Matrix<T>, negative_slope: T) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { negative_slope * v })
}

/// Derivative of [`rectify`] at the forward input `x`. At exactly zero the
/// negative branch applies.
pub fn rectify_backward<T: Scalar>(
    x: &Matrix<T>,
    dout: &Matrix<T>,
    negative_slope: T,
) -> Result<Matrix<T>> {
    x.expect_same_shape("rectify_backward", dout)?;
    let data = x
        .as_slice()
        .iter()
        .zip(dout.as_slice())
        .map(|(&v, &g)| if v > T::zero() { g } else { negative_slope * g })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Square boolean mask, `true` where attention is allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    n: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.bits[i * self.n + j] = on;
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.n..(i + 1) * self.n]
    }
}

/// Row-wise softmax restricted to masked-in entries; masked-out entries are
/// exactly zero.
pub fn masked_softmax<T: Scalar>(scores: &Matrix<T>, mask: &Mask) -> Result<Matrix<T>> {
    let n = mask.size();
    if scores.shape() != (n, n) {
        return Err(shape_err(
            "masked_softmax",
            format!("scores {:?} with mask of size {n}", scores.shape()),
        ));
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let allowed = mask.row(i);
        let row = scores.row(i);
        let max = row
            .iter()
            .zip(allowed)
            .filter(|(_, &a)| a)
            .map(|(&s, _)| s)
            .fold(None, |m: Option<T>, s| Some(m.map_or(s, |m| m.max(s))))
            .ok_or_else(|| Error::Graph(format!("attention row {i} has no admissible entry")))?;
        let dst = out.row_mut(i);
        let mut total = T::zero();
        for j in 0..n {
            if allowed[j] {
                let e = (row[j] - max).exp();
                dst[j] = e;
                total += e;
            }
        }
        for v in dst.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

/// Backward of a row softmax given its output `probs`:
/// `dS = P ⊙ (dP − rowsum(P ⊙ dP))`. Masked-out entries have zero probability
/// and so receive zero gradient.
pub fn masked_softmax_backward<T: Scalar>(probs: &Matrix<T>, dprobs: &Matrix<T>) -> Result<Matrix<T>> {
    probs.expect_same_shape("masked_softmax_backward", dprobs)?;
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let p = probs.row(i);
        let dp = dprobs.row(i);
        let dot: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
        for (o, (&pj, &dj)) in out.row_mut(i).iter_mut().zip(p.iter().zip(dp)) {
            *o = pj * (dj - dot);
        }
    }
    Ok(out)
}

/// Plain row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Mean softmax cross-entropy together with its gradient w.r.t. the logits.
#[derive(Clone, Debug)]
pub struct Loss<T> {
    pub value: T,
    pub grad: Matrix<T>,
}

pub fn cross_entropy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<Loss<T>> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(shape_err(
            "cross_entropy",
            format!("{} labels for {b} logit rows", labels.len()),
        ));
    }
    if b == 0 {
        return Err(Error::Data("cross_entropy on an empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Data(format!("label {bad} out of range for {c} classes")));
    }
    let inv_b = T::one() / T::from_usize(b).unwrap();
    let mut grad = softmax_rows(logits);
    let mut total = T::zero();
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total += lse - row[label];
        let g = grad.row_mut(i);
        g[label] -= T::one();
        g.iter_mut().for_each(|v| *v *= inv_b);
    }
    Ok(Loss {
        value: total * inv_b,
        grad,
    })
}
