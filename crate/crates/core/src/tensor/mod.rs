//! A minimal dense-tensor compute core: f64 row-major tensors, the GEMM
//! wrappers every layer shares, and forward/backward implementations for
//! exactly the layer set the detector architectures need.

use crate::error::{Error, Result};

pub mod adam;
pub mod conv;
pub mod dense;
pub mod elem;
pub mod gradcheck;
pub mod init;
pub mod layer;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod residual;
pub mod rnn;

pub use adam::Adam;
pub use conv::Conv2d;
pub use dense::Dense;
pub use elem::{Dropout, Flatten, Relu, Sigmoid};
pub use layer::{Layer, Phase};
pub use loss::bce_loss;
pub use norm::BatchNorm;
pub use pool::MaxPool2;
pub use residual::ResidualBlock;
pub use rnn::{BiGru, Gru};

/// Dense tensor of f64 values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor shape {shape:?} does not match {} values",
            data.len()
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.shape[i]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with both shapes unless this tensor has exactly `expected`.
    pub fn check_shape(&self, expected: &[usize], context: &str) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::shape(context, format!("{expected:?}"), format!("{:?}", self.shape)))
        }
    }

    /// Rank/leading-dims check for layers that only constrain part of the
    /// shape (e.g. "rank 4 with dim 1 = channels").
    pub fn check_dim(&self, axis: usize, expected: usize, context: &str) -> Result<()> {
        if self.shape.get(axis) == Some(&expected) {
            Ok(())
        } else {
            Err(Error::shape(
                context,
                format!("dim {axis} = {expected}"),
                format!("{:?}", self.shape),
            ))
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "tensor add",
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// A trainable tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Param {
        let grad = Tensor::zeros(&value.shape);
        Param { value, grad }
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

/// c[m,n] = a[m,k]·b[k,n] + beta·c, all row-major contiguous.
pub(crate) fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// c[m,n] = aᵀ·b + beta·c where a is stored row-major as [k,m].
pub(crate) fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), n as isize, 1,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// c[m,n] = a·bᵀ + beta·c where b is stored row-major as [n,k].
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            beta,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                for j in 0..n {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }

    fn arange(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919 + 13) % 101) as f64 * scale - 0.4).collect()
    }

    #[test]
    fn gemm_nn_matches_naive() {
        for &(m, k, n) in &[(1, 1, 1), (3, 4, 5), (7, 2, 9), (8, 8, 8)] {
            let a = arange(m * k, 0.01);
            let b = arange(k * n, 0.02);
            let mut c = vec![0.0; m * n];
            gemm_nn(m, k, n, &a, &b, 0.0, &mut c);
            let want = naive_nn(m, k, n, &a, &b);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gemm_tn_matches_explicit_transpose() {
        let (m, k, n) = (4, 6, 3);
        let a_t = arange(k * m, 0.05); // stored [k, m]
        let b = arange(k * n, 0.03);
        let mut a = vec![0.0; m * k];
        for i in 0..m {
            for l in 0..k {
                a[i * k + l] = a_t[l * m + i];
            }
        }
        let mut c = vec![0.0; m * n];
        gemm_tn(m, k, n, &a_t, &b, 0.0, &mut c);
        let want = naive_nn(m, k, n, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gemm_nt_matches_explicit_transpose() {
        let (m, k, n) = (5, 3, 7);
        let a = arange(m * k, 0.02);
        let b_t = arange(n * k, 0.04); // stored [n, k]
        let mut b = vec![0.0; k * n];
        for l in 0..k {
            for j in 0..n {
                b[l * n + j] = b_t[j * k + l];
            }
        }
        let mut c = vec![0.0; m * n];
        gemm_nt(m, k, n, &a, &b_t, 0.0, &mut c);
        let want = naive_nn(m, k, n, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gemm_beta_accumulates() {
        let (m, k, n) = (2, 3, 2);
        let a = arange(m * k, 0.1);
        let b = arange(k * n, 0.1);
        let mut c = vec![1.0; m * n];
        gemm_nn(m, k, n, &a, &b, 1.0, &mut c);
        let want = naive_nn(m, k, n, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - (y + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_shape_checks() {
        let t = Tensor::zeros(&[2, 3]);
        assert_eq!(t.numel(), 6);
        assert!(t.check_shape(&[2, 3], "t").is_ok());
        let err = t.check_shape(&[3, 2], "t").unwrap_err();
        assert!(err.to_string().contains("[3, 2]") && err.to_string().contains("[2, 3]"));
    }

    #[test]
    #[should_panic(expected = "does not match")]
    fn from_vec_rejects_bad_count() {
        Tensor::from_vec(&[2, 2], vec![1.0; 5]);
    }
}
