use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major array of `f64` with shape metadata.
///
/// Every dimension is positive and `shape.iter().product() == data.len()`.
/// [`Tensor::new`] additionally rejects NaN and infinities; [`Tensor::from_vec`]
/// skips that scan and is what the hot training paths use.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::dim("tensor", "shape must have at least one axis"));
    }
    if let Some(axis) = shape.iter().position(|&d| d == 0) {
        return Err(Error::dim("tensor", format!("axis {axis} has size 0")));
    }
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(Error::dim(
            "tensor",
            format!("shape {shape:?} holds {expected} values, got {len}"),
        ));
    }
    Ok(())
}

impl Tensor {
    /// Checked constructor: validates the shape and rejects non-finite values.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let t = Self::from_vec(shape, data)?;
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    /// Shape-checked constructor without the finiteness scan.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        check_shape(shape, len).expect("tensor shape must have positive dimensions");
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        check_shape(shape, self.data.len())?;
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Value at a multi-index. Panics on out-of-range indices.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index {index:?} out of range for shape {:?}", self.shape);
            off = off * d + i;
        }
        off
    }

    /// Errors if any value is NaN or infinite.
    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!(
                "{context} (flat index {i}, value {})",
                self.data[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += other`, requiring identical shapes.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.require_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn require_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(
                op,
                format!("shapes {:?} and {:?} differ", self.shape, other.shape),
            ));
        }
        Ok(())
    }

    /// Errors unless the tensor has rank `rank`.
    pub(crate) fn require_rank(&self, rank: usize, op: &'static str, what: &str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::dim(
                op,
                format!(
                    "{what} must have rank {rank}, got shape {:?}",
                    self.shape
                ),
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?}", self.shape)?;
        let head = &self.data[..self.data.len().min(PREVIEW)];
        write!(f, " {head:?}")?;
        if self.data.len() > PREVIEW {
            write!(f, "…")?;
        }
        Ok(())
    }
}

/// A value with its gradient, used where a parameter and its accumulated
/// gradient travel together.
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair {
    value: Tensor,
    grad: Tensor,
}

impl GradPair {
    pub fn new(value: Tensor, grad: Tensor) -> Result<Self> {
        value.require_same_shape(&grad, "grad_pair")?;
        Ok(Self { value, grad })
    }

    /// Pairs `value` with a zero gradient.
    pub fn zeroed(value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Self { value, grad }
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor {
        &mut self.grad
    }

    pub fn into_parts(self) -> (Tensor, Tensor) {
        (self.value, self.grad)
    }
}
