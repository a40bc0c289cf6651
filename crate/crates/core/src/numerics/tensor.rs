//! Dense row-major tensor.

use rand::Rng;

use super::precision::Scalar;
use crate::error::{Error, Result};

/// Dense numeric array. `data` is row-major; `shape.iter().product() == data.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Argument(format!(
                "tensor shape {:?} implies {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::ZERO; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: Vec<usize>, f: impl FnMut(usize) -> T) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: (0..n).map(f).collect(),
        }
    }

    /// Uniform values in `[lo, hi)`, drawn in flat order from `rng`.
    pub fn random_uniform(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| {
            T::from_f64(lo + (hi - lo) * rng.random::<f64>())
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Same data, new shape; element count must match.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::dimension("reshape", &self.shape, &shape));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }


    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a rank-2 tensor as a slice.
    pub fn row(&self, i: usize) -> &[T] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Maximum absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }
}

impl Tensor<f64> {
    pub fn to_f32(&self) -> Tensor<f32> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

impl Tensor<f32> {
    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

fn check_rank2<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<()> {
    if t.rank() != 2 {
        return Err(Error::Argument(format!(
            "{op}: expected rank-2 tensor, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Standard matrix product of two rank-2 tensors.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_rank2("matmul", a)?;
    check_rank2("matmul", b)?;
    if a.dim(1) != b.dim(0) {
        return Err(Error::dimension("matmul", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.dim(0), a.dim(1), b.dim(1));
    let mut out = Tensor::zeros(vec![m, n]);
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::ONE,
            a.as_slice().as_ptr(),
            k as isize,
            1,
            b.as_slice().as_ptr(),
            n as isize,
            1,
            T::ZERO,
            out.as_mut_slice().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `transpose(a) * b` without materializing the transpose.
pub(crate) fn matmul_tn<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_rank2("matmul_tn", a)?;
    check_rank2("matmul_tn", b)?;
    if a.dim(0) != b.dim(0) {
        return Err(Error::dimension("matmul_tn", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.dim(1), a.dim(0), b.dim(1));
    let mut out = Tensor::zeros(vec![m, n]);
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::ONE,
            a.as_slice().as_ptr(),
            1,
            a.dim(1) as isize,
            b.as_slice().as_ptr(),
            n as isize,
            1,
            T::ZERO,
            out.as_mut_slice().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `a * transpose(b)` without materializing the transpose.
pub(crate) fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    check_rank2("matmul_nt", a)?;
    check_rank2("matmul_nt", b)?;
    if a.dim(1) != b.dim(1) {
        return Err(Error::dimension("matmul_nt", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.dim(0), a.dim(1), b.dim(0));
    let mut out = Tensor::zeros(vec![m, n]);
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::ONE,
            a.as_slice().as_ptr(),
            k as isize,
            1,
            b.as_slice().as_ptr(),
            1,
            b.dim(1) as isize,
            T::ZERO,
            out.as_mut_slice().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}
