//! Dense row-major tensors.
//!
//! Rank 1 and rank 2 cover everything the model needs; matrix products are
//! delegated to `ndarray` (single-threaded, deterministic accumulation).

use ndarray::{ArrayView2, ArrayViewMut2};

use super::scalar::Scalar;
use super::KernelError;

/// A dense tensor: shape plus contiguous row-major data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(numel, data.len(), "shape {shape:?} does not match data length {}", data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![S::zero(); numel] }
    }

    pub fn scalar(v: S) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn vector(data: Vec<S>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Row count when viewed as a matrix; rank-1 tensors are single rows.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            r => panic!("rows() on rank-{r} tensor"),
        }
    }

    /// Column count when viewed as a matrix.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            r => panic!("cols() on rank-{r} tensor"),
        }
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn item(&self) -> S {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn view2(&self) -> ArrayView2<'_, S> {
        ArrayView2::from_shape((self.rows(), self.cols()), &self.data).expect("contiguous view")
    }

    pub fn view2_mut(&mut self) -> ArrayViewMut2<'_, S> {
        let (r, c) = (self.rows(), self.cols());
        ArrayViewMut2::from_shape((r, c), &mut self.data).expect("contiguous view")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor<S>) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    pub fn scale_assign(&mut self, c: S) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }

    /// Convert elements to another scalar type through f64.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.into_f64())).collect(),
        }
    }
}

/// `a @ b`, with optional transposes on either operand.
pub fn matmul<S: Scalar>(a: &Tensor<S>, ta: bool, b: &Tensor<S>, tb: bool) -> Tensor<S> {
    let av = a.view2();
    let bv = b.view2();
    let av = if ta { av.reversed_axes() } else { av };
    let bv = if tb { bv.reversed_axes() } else { bv };
    assert_eq!(av.ncols(), bv.nrows(), "matmul inner dimension mismatch");
    let mut out = Tensor::zeros(vec![av.nrows(), bv.ncols()]);
    ndarray::linalg::general_mat_mul(S::one(), &av, &bv, S::zero(), &mut out.view2_mut());
    out
}

/// Exponent-shifted softmax along one axis (0 = down columns, 1 = along rows).
pub fn softmax<S: Scalar>(x: &Tensor<S>, axis: usize) -> Result<Tensor<S>, KernelError> {
    assert!(x.rank() <= 2, "softmax expects rank <= 2");
    assert!(axis < 2, "softmax axis out of range");
    if x.numel() == 0 {
        return Err(KernelError::EmptyAxis { op: "softmax" });
    }
    let mut out = x.clone();
    if x.rank() == 1 || axis == 1 {
        for i in 0..out.rows() {
            softmax_slice(out.row_mut(i));
        }
    } else {
        let (r, c) = (x.rows(), x.cols());
        for j in 0..c {
            let mut col: Vec<S> = (0..r).map(|i| x.row(i)[j]).collect();
            softmax_slice(&mut col);
            for i in 0..r {
                out.row_mut(i)[j] = col[i];
            }
        }
    }
    Ok(out)
}

pub(crate) fn softmax_slice<S: Scalar>(xs: &mut [S]) {
    let max = xs.iter().cloned().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v = *v / sum;
    }
}
