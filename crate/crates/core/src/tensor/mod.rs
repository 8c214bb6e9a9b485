//! Dense tensors and the reverse-mode differentiation tape.
//!
//! Everything in the crate computes on [`Tensor`] values (flat row-major
//! `f64` buffers with a shape) threaded through a [`Tape`] that records
//! executed operations and replays them in reverse for gradients.

mod checkpoint;
mod kernels;
mod tape;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use tape::{Precision, Tape, TopK, Var, SCATTER_SKIP};

use rand::Rng;

use crate::error::{Error, Result};

/// Dense n-dimensional array of `f64` scalars in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    /// Build a tensor from a shape and a flat row-major buffer.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} wants {numel} scalars, buffer has {}",
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; numel], requires_grad: false, grad: None }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; numel], requires_grad: false, grad: None }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value], requires_grad: false, grad: None }
    }

    /// Uniform init in `[-bound, bound]` with `bound = 1/sqrt(fan_in)`.
    pub fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(-bound..=bound)).collect();
        Tensor { shape: shape.to_vec(), data, requires_grad: false, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
        if !flag {
            self.grad = None;
        }
    }

    /// Gradient buffer, present only after a backward pass reached this tensor.
    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub(crate) fn grad_mut(&mut self) -> &mut Option<Vec<f64>> {
        &mut self.grad
    }

    /// Accumulate `delta` into the gradient buffer, allocating it on first use.
    pub(crate) fn accumulate_grad(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.data.len());
        match &mut self.grad {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => self.grad = Some(delta.to_vec()),
        }
    }

    /// Element at a 2-D position; rows×cols tensors only.
    pub fn at2(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.shape[1] + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Validate that two shapes are identical.
pub(crate) fn same_shape(a: &[usize], b: &[usize], op: &str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{op}: shape {a:?} vs {b:?}")));
    }
    Ok(())
}
