//! Dense CHW tensors and the numerical kernels the network is built from.
//!
//! Every feature map and image is a [`Tensor`]: channel-major, then
//! row-major, single precision, no batch dimension. Learned weights of
//! arbitrary rank live in [`ParamTensor`].

mod conv;
mod fft;
mod norm;
mod ops;
mod pool;
mod shuffle;

pub use conv::{conv2d, Conv2d, ConvSpec};
pub use fft::{fft2d, ifft2d, ComplexGrid};
pub use norm::{layer_norm_channel, LayerNorm, LAYER_NORM_EPS};
pub use ops::{
    bilinear_upsample, concat_channels, elementwise_add, elementwise_mul, gelu, gelu_scalar,
    scale, scale_channels, softmax_in_place, softmax_rows, split_channels,
};
pub use pool::{global_avg_pool, local_avg_pool};
pub use shuffle::{pixel_shuffle, pixel_unshuffle};

pub(crate) use fft::fft2d_f64;

use crate::error::{Error, Result};

/// Rank-3 feature map in (channels, height, width) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape(
                "tensor",
                format!("dimensions must be positive, got ({channels}, {height}, {width})"),
            ));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::shape(
                "tensor",
                format!(
                    "data length {} does not match ({channels}, {height}, {width}) = {expected}",
                    data.len()
                ),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::full(channels, height, width, 0.0)
    }

    pub fn full(channels: usize, height: usize, width: usize, value: f32) -> Self {
        assert!(
            channels > 0 && height > 0 && width > 0,
            "tensor dimensions must be positive"
        );
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Builds a tensor by evaluating `f(c, y, x)` at every element.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data).expect("from_fn: dimensions must be positive")
    }

    pub(crate) fn from_parts_unchecked(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    /// The `c`-th channel plane, row-major.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(
                op,
                format!("shape {:?} vs {:?}", self.shape(), other.shape()),
            ))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Learned weight of arbitrary rank (conv kernels are rank 4, biases and
/// affine vectors rank 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl ParamTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if dims.is_empty() || data.len() != expected {
            return Err(Error::shape(
                "param tensor",
                format!("data length {} does not match dims {:?}", data.len(), dims),
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        Self::full(dims, 0.0)
    }

    pub fn full(dims: Vec<usize>, value: f32) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![value; n],
        }
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
