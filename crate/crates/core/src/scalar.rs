//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the numeric core is generic over (`f32` or `f64`).
///
/// Besides the usual float arithmetic, a scalar supplies a strided
/// general matrix multiply, so the dense kernels can dispatch to a
/// blocked implementation for each concrete width.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// `c <- alpha * a * b + beta * c` where `a` is `m x k`, `b` is `k x n`
    /// and `c` is `m x n`, each addressed by (row stride, column stride).
    ///
    /// Callers must guarantee that every addressed element lies inside the
    /// given slices; this is asserted on the extreme corners.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    /// Lossy conversion used for constants; panics only on values no float can represent.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable as scalar")
    }
}

fn last_index(rows: usize, cols: usize, (rs, cs): (isize, isize)) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize
}

fn check_extent(len: usize, rows: usize, cols: usize, strides: (isize, isize)) {
    assert!(strides.0 >= 0 && strides.1 >= 0, "negative strides are not supported");
    if rows > 0 && cols > 0 {
        assert!(last_index(rows, cols, strides) < len, "gemm operand out of bounds");
    }
}

macro_rules! impl_scalar {
    ($ty:ty, $kernel:path) => {
        impl Scalar for $ty {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, c_strides);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: extents of all three operands were checked above and
                // `c` is uniquely borrowed, so no aliasing with `a` or `b`.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
