//! Minimal deterministic dense-array kernels.
//!
//! Everything here is plain row-major `f64` storage with hand-written loops:
//! no SIMD, no threading, no fused operations. Identical inputs produce
//! bit-identical outputs across runs, which the higher layers rely on.

mod ops;

pub use ops::{
    conv2d, depthwise_xcorr, global_pool, softmax, softmax_rows, ConvKernel, Padding, PoolMode,
};

use crate::error::{Error, Result};

/// Role carried by one tensor axis. Operations check roles, not just
/// lengths, so a channel/scale mix-up fails loudly instead of silently
/// producing garbage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisRole {
    Channel,
    Scale,
    Height,
    Width,
}

impl std::fmt::Display for AxisRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AxisRole::Channel => "channel",
            AxisRole::Scale => "scale",
            AxisRole::Height => "height",
            AxisRole::Width => "width",
        };
        f.write_str(name)
    }
}

pub const CHW: [AxisRole; 3] = [AxisRole::Channel, AxisRole::Height, AxisRole::Width];
pub const CSHW: [AxisRole; 4] = [
    AxisRole::Channel,
    AxisRole::Scale,
    AxisRole::Height,
    AxisRole::Width,
];
pub const CS: [AxisRole; 2] = [AxisRole::Channel, AxisRole::Scale];

/// Dense row-major tensor with role-labelled axes and finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    axes: Vec<AxisRole>,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(axes: &[AxisRole], shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if axes.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} axis roles for {} axis lengths",
                axes.len(),
                shape.len()
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        let t = Tensor {
            axes: axes.to_vec(),
            shape: shape.to_vec(),
            data,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(axes: &[AxisRole], shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            axes: axes.to_vec(),
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(axes: &[AxisRole], shape: &[usize], value: f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            axes: axes.to_vec(),
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(axes: &[AxisRole], shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Tensor {
            axes: axes.to_vec(),
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn axes(&self) -> &[AxisRole] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    /// Length of the axis carrying `role`, or an error naming the roles
    /// actually present.
    pub fn dim(&self, role: AxisRole) -> Result<usize> {
        self.axes
            .iter()
            .position(|&r| r == role)
            .map(|i| self.shape[i])
            .ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "no {role} axis in tensor with axes {:?}",
                    self.axes
                ))
            })
    }

    /// Checks that the axis roles are exactly `expected`, in order.
    pub fn expect_axes(&self, expected: &[AxisRole]) -> Result<()> {
        if self.axes != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected axes {:?}, got {:?}",
                expected, self.axes
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!(
                "non-finite value {} at flat index {} (shape {:?})",
                self.data[pos], pos, self.shape
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn at3(&self, a: usize, b: usize, c: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(a * self.shape[1] + b) * self.shape[2] + c]
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 4);
        self.data[((a * self.shape[1] + b) * self.shape[2] + c) * self.shape[3] + d]
    }

    #[inline]
    pub fn set3(&mut self, a: usize, b: usize, c: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(a * self.shape[1] + b) * self.shape[2] + c] = v;
    }

    #[inline]
    pub fn set4(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 4);
        self.data[((a * self.shape[1] + b) * self.shape[2] + c) * self.shape[3] + d] = v;
    }

    /// Elementwise `self + scale * other`; shapes and roles must agree.
    pub fn add_scaled(&self, other: &Tensor, scale: f64) -> Result<Tensor> {
        if self.axes != other.axes || self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "add_scaled on {:?}{:?} vs {:?}{:?}",
                self.axes, self.shape, other.axes, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Tensor::new(&self.axes, &self.shape, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            axes: self.axes.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Plain 2-D matrix used for attention internals; rows index queries,
/// columns index keys or flattened spatial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `self (r x k) * other (k x c)`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.at(k, c);
                }
            }
        }
        Ok(out)
    }
}
