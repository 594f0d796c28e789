//! Minimal dense tensor: a flat `Vec<f32>` plus a shape, row-major.
//!
//! Activations use `(height, width, channels)` layout, so the channel index
//! varies fastest; convolution weights use `(out_ch, in_ch, kh, kw)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    /// Builds a tensor from existing data. Panics if the element count does
    /// not match the shape; callers constructing from untrusted input should
    /// check lengths first.
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Flat offset of `(y, x, c)` in an `(h, w, c)` tensor.
    #[inline]
    pub fn idx3(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (y * self.shape[1] + x) * self.shape[2] + c
    }

    #[inline]
    pub fn at3(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.idx3(y, x, c)]
    }

    #[inline]
    pub fn set3(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let i = self.idx3(y, x, c);
        self.data[i] = v;
    }

    /// Flat offset of `(a, b, c, d)` in a rank-4 tensor, e.g. convolution
    /// weights stored as `(out_ch, in_ch, kh, kw)`.
    #[inline]
    pub fn idx4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 4);
        ((a * self.shape[1] + b) * self.shape[2] + c) * self.shape[3] + d
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, c: usize, d: usize) -> f32 {
        self.data[self.idx4(a, b, c, d)]
    }

    /// Largest absolute element, 0.0 for an empty tensor.
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}
