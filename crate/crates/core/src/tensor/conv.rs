use rayon::prelude::*;

use super::{ParamTensor, Tensor};
use crate::error::{Error, Result};

/// Geometry of a stride-1, same-padded 2D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub groups: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    /// Dense `k×k` convolution with bias.
    pub fn dense(in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            dilation: 1,
            groups: 1,
            has_bias: true,
        }
    }

    /// 1×1 point-wise convolution with bias.
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::dense(in_channels, out_channels, 1)
    }

    /// Depth-wise `k×k` convolution (one filter per channel) with bias.
    pub fn depthwise(channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            in_channels: channels,
            out_channels: channels,
            kernel_size,
            dilation,
            groups: channels,
            has_bias: true,
        }
    }

    pub fn padding(&self) -> usize {
        self.dilation * (self.kernel_size - 1) / 2
    }

    pub fn weight_dims(&self) -> Vec<usize> {
        vec![
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel_size,
            self.kernel_size,
        ]
    }

    pub fn param_count(&self) -> usize {
        let w: usize = self.weight_dims().iter().product();
        w + if self.has_bias { self.out_channels } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::InvalidArgument(format!("conv spec: {detail}")));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return bad(format!("kernel size {} must be odd", self.kernel_size));
        }
        if self.dilation == 0 || self.groups == 0 {
            return bad("dilation and groups must be at least 1".into());
        }
        if self.in_channels % self.groups != 0 || self.out_channels % self.groups != 0 {
            return bad(format!(
                "channels {}→{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            ));
        }
        Ok(())
    }
}

/// A convolution layer: geometry plus its learned weights.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: ParamTensor,
    pub bias: Option<Vec<f32>>,
}

impl Conv2d {
    pub fn new(spec: ConvSpec, weight: ParamTensor, bias: Option<Vec<f32>>) -> Result<Self> {
        check_params(&spec, &weight, bias.as_deref())?;
        Ok(Self { spec, weight, bias })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        conv2d(input, &self.spec, &self.weight, self.bias.as_deref())
    }
}

fn check_params(spec: &ConvSpec, weights: &ParamTensor, bias: Option<&[f32]>) -> Result<()> {
    spec.validate()?;
    let expected = spec.weight_dims();
    let names = ["out_channels", "in_channels/groups", "kernel_h", "kernel_w"];
    if weights.dims().len() != 4 {
        return Err(Error::shape(
            "conv2d",
            format!("weight rank is {}, expected 4", weights.dims().len()),
        ));
    }
    for (i, (&got, &want)) in weights.dims().iter().zip(&expected).enumerate() {
        if got != want {
            return Err(Error::shape(
                "conv2d",
                format!("weight dimension {i} ({}) is {got}, expected {want}", names[i]),
            ));
        }
    }
    match (spec.has_bias, bias) {
        (true, Some(b)) if b.len() != spec.out_channels => Err(Error::shape(
            "conv2d",
            format!("bias length is {}, expected out_channels = {}", b.len(), spec.out_channels),
        )),
        (true, None) => Err(Error::shape("conv2d", "spec requires a bias, none given")),
        (false, Some(_)) => Err(Error::shape("conv2d", "spec has no bias, one was given")),
        _ => Ok(()),
    }
}

/// Stride-1 cross-correlation with zero "same" padding.
///
/// Each output plane starts at its bias and accumulates one shifted,
/// weighted input plane per (input channel, tap), in that fixed order, so
/// results do not depend on how output channels are scheduled.
pub fn conv2d(
    input: &Tensor,
    spec: &ConvSpec,
    weights: &ParamTensor,
    bias: Option<&[f32]>,
) -> Result<Tensor> {
    check_params(spec, weights, bias)?;
    if input.channels() != spec.in_channels {
        return Err(Error::shape(
            "conv2d",
            format!(
                "input channels is {}, expected in_channels = {}",
                input.channels(),
                spec.in_channels
            ),
        ));
    }

    let (h, w) = (input.height(), input.width());
    let plane = h * w;
    let k = spec.kernel_size;
    let pad = spec.padding() as isize;
    let dil = spec.dilation as isize;
    let in_per_group = spec.in_channels / spec.groups;
    let out_per_group = spec.out_channels / spec.groups;
    let wdata = weights.data();
    let src = input.data();

    let mut out = vec![0.0f32; spec.out_channels * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, acc)| {
        if let Some(b) = bias {
            acc.fill(b[o]);
        }
        let group = o / out_per_group;
        for ic_local in 0..in_per_group {
            let ic = group * in_per_group + ic_local;
            let in_plane = &src[ic * plane..(ic + 1) * plane];
            let wbase = (o * in_per_group + ic_local) * k * k;
            for ky in 0..k {
                let dy = ky as isize * dil - pad;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize * dil - pad;
                    let (x0, x1) = valid_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = wdata[wbase + ky * k + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let dst = &mut acc[y * w + x0..y * w + x1];
                        let sx0 = (x0 as isize + dx) as usize;
                        let s = &in_plane[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        for (d, &v) in dst.iter_mut().zip(s) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    });
    Ok(Tensor::from_parts_unchecked(spec.out_channels, h, w, out))
}

/// Output coordinates `o` in `[lo, hi)` for which `o + offset` is inside `[0, len)`.
fn valid_range(len: usize, offset: isize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}
