use rand::Rng;

use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// `U(-bound, bound)` entries drawn in row-major order.
pub(crate) fn uniform<T: Scalar>(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.random_range(-bound..=bound)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}
