//! Scalar abstraction shared by the geometric and linear-algebra code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    fn cast(v: f64) -> Self;

    fn to_f64_lossless(self) -> f64;

    /// `c += aᵀ·a` where `a` is a row-major `rows × cols` matrix and `c` is
    /// a row-major `cols × cols` matrix.
    fn gram_accumulate(a: &[Self], rows: usize, cols: usize, c: &mut [Self]) {
        assert_eq!(a.len(), rows * cols, "gram input has wrong length");
        let at = MatRef {
            data: a,
            row_stride: 1,
            col_stride: cols,
        };
        Self::gemm(cols, rows, cols, at, MatRef::row_major(a, cols), Self::one(), c);
    }

    /// `c = beta·c + a·b` for an `m × k` view `a`, a `k × n` view `b` and a
    /// row-major `m × n` output.
    fn gemm(m: usize, k: usize, n: usize, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut [Self]);
}

/// Strided read-only matrix view: element `(r, c)` is `data[r·row_stride + c·col_stride]`.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T> MatRef<'a, T> {
    pub fn row_major(data: &'a [T], cols: usize) -> Self {
        Self {
            data,
            row_stride: cols,
            col_stride: 1,
        }
    }

    pub fn col_major(data: &'a [T], rows: usize) -> Self {
        Self {
            data,
            row_stride: 1,
            col_stride: rows,
        }
    }

    fn check(&self, rows: usize, cols: usize, what: &str) {
        if rows == 0 || cols == 0 {
            return;
        }
        let last = (rows - 1) * self.row_stride + (cols - 1) * self.col_stride;
        assert!(last < self.data.len(), "{what} view exceeds its buffer");
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            #[inline]
            fn cast(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64_lossless(self) -> f64 {
                self as f64
            }

            fn gemm(m: usize, k: usize, n: usize, a: MatRef<'_, Self>, b: MatRef<'_, Self>, beta: Self, c: &mut [Self]) {
                a.check(m, k, "lhs");
                b.check(k, n, "rhs");
                assert_eq!(c.len(), m * n, "gemm output has wrong length");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every element addressed through the strides was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.data.as_ptr(),
                        a.row_stride as isize,
                        a.col_stride as isize,
                        b.data.as_ptr(),
                        b.row_stride as isize,
                        b.col_stride as isize,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_gram(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let mut c = vec![0.0; cols * cols];
        for i in 0..cols {
            for j in 0..cols {
                c[i * cols + j] = (0..rows).map(|r| a[r * cols + i] * a[r * cols + j]).sum();
            }
        }
        c
    }

    #[test]
    fn gemm_with_transposed_view() {
        // a is 2×3 row-major, b is 3×2 stored column-major.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, -1.0, 2.0, 1.0, 0.0];
        let mut c = [0.0; 4];
        f64::gemm(2, 3, 2, MatRef::row_major(&a, 3), MatRef::col_major(&b, 3), 0.0, &mut c);
        assert_eq!(c, [-2.0, 4.0, -2.0, 13.0]);
    }

    #[test]
    fn gram_matches_naive_product() {
        let rows = 7;
        let cols = 5;
        let a: Vec<f64> = (0..rows * cols).map(|v| ((v * 37 % 11) as f64) - 5.0).collect();
        let mut c = vec![1.0; cols * cols];
        f64::gram_accumulate(&a, rows, cols, &mut c);
        let expected = naive_gram(&a, rows, cols);
        for (got, want) in c.iter().zip(&expected) {
            assert!((got - (want + 1.0)).abs() < 1e-12);
        }

        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let mut c32 = vec![0.0f32; cols * cols];
        f32::gram_accumulate(&a32, rows, cols, &mut c32);
        for (got, want) in c32.iter().zip(&expected) {
            assert!((*got as f64 - want).abs() < 1e-4);
        }
    }
}
