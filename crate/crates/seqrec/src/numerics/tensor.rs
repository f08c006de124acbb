//! Dense row-major tensors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: lhs {lhs:?}, rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} cannot hold {len} elements")]
    ShapeLenMismatch { shape: Vec<usize>, len: usize },
    #[error("{op} expects {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: &'static str,
        shape: Vec<usize>,
    },
    #[error("axis {axis} out of range for shape {shape:?}")]
    AxisOutOfRange { axis: usize, shape: Vec<usize> },
    #[error("{op}: index {index} out of bounds for extent {extent}")]
    IndexOutOfBounds {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("{op}: empty input list")]
    EmptyInput { op: &'static str },
}

/// Immutable dense tensor: a shape and a flat f64 buffer.
///
/// Rank 0 (shape `[]`) is a scalar, rank 1 a vector, rank 2 a row-major
/// matrix. `grad_required` marks leaves the tape should track.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad_required: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() || shape.iter().any(|&e| e == 0) {
            return Err(NumericsError::ShapeLenMismatch { shape, len: data.len() });
        }
        Ok(Tensor { shape, data, grad_required: false })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![], data: vec![value], grad_required: false }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector needs at least one element");
        Tensor { shape: vec![data.len()], data, grad_required: false }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![0.0; len], grad_required: false }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![value; len], grad_required: false }
    }

    /// Marks this tensor as a differentiable leaf when fed to a tape.
    pub fn with_grad(mut self) -> Self {
        self.grad_required = true;
        self
    }

    pub fn grad_required(&self) -> bool {
        self.grad_required
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Scalar value. Panics on non-scalars.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() on shape {:?}", self.shape);
        self.data[0]
    }

    /// Row extent for rank-2 tensors.
    pub fn rows(&self) -> usize {
        assert_eq!(self.rank(), 2, "rows() on shape {:?}", self.shape);
        self.shape[0]
    }

    /// Column extent for rank-2 tensors.
    pub fn cols(&self) -> usize {
        assert_eq!(self.rank(), 2, "cols() on shape {:?}", self.shape);
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        let cols = self.cols();
        self.data[r * cols + c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
