//! Dense storage, hand-derived forward/backward primitives and plain SGD.

mod matrix;
mod ops;
mod optim;

pub use matrix::{gemm, product, Matrix, Op};
pub use ops::{
    affine, affine_backward, affine_param_grads, cross_entropy, masked_softmax,
    masked_softmax_backward, rectify, rectify_backward, softmax_rows, Loss, Mask,
};
pub use optim::{sgd_step, LrSchedule, ParamTensor};
