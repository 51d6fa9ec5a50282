//! Slow, direct implementations used to cross-check the kernels. They share
//! no code with the optimized paths.

use crate::tensor::{ConvSpec, Tensor};

/// Quadruple-loop cross-correlation with zero padding, accumulated in f64.
pub fn direct_conv2d(input: &Tensor, spec: &ConvSpec, weight: &[f32], bias: Option<&[f32]>) -> Tensor {
    let (_, h, w) = input.shape();
    let k = spec.kernel_size as isize;
    let d = spec.dilation as isize;
    let pad = spec.dilation * (spec.kernel_size - 1) / 2;
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    Tensor::from_fn(spec.out_channels, h, w, |o, y, x| {
        let g = o / cout_g;
        let mut acc = bias.map_or(0.0, |b| b[o] as f64);
        for icl in 0..cin_g {
            let ic = g * cin_g + icl;
            for ky in 0..k {
                for kx in 0..k {
                    let sy = y as isize + ky * d - pad as isize;
                    let sx = x as isize + kx * d - pad as isize;
                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                        continue;
                    }
                    let wi = ((o * cin_g + icl) as isize * k + ky) * k + kx;
                    acc += weight[wi as usize] as f64 * input.get(ic, sy as usize, sx as usize) as f64;
                }
            }
        }
        acc as f32
    })
}

/// O(N²) 2D DFT of a real plane, returned as (re, im) pairs.
pub fn naive_dft2d(plane: &[f32], h: usize, w: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    let mut out = vec![(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * PI * ((u * y % h) as f64 / h as f64 + (v * x % w) as f64 / w as f64);
                    let val = plane[y * w + x] as f64;
                    re += val * phase.cos();
                    im += val * phase.sin();
                }
            }
            out[u * w + v] = (re, im);
        }
    }
    out
}

/// Per-row scaled dot-product attention written as explicit loops.
pub fn naive_row_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Tensor {
    let (c, h, w) = q.shape();
    let scale = (c as f64).sqrt();
    let mut out = Tensor::zeros(c, h, w);
    for y in 0..h {
        for i in 0..w {
            let scores: Vec<f64> = (0..w)
                .map(|j| (0..c).map(|ch| q.get(ch, y, i) as f64 * k.get(ch, y, j) as f64).sum::<f64>() / scale)
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for ch in 0..c {
                let val: f64 = (0..w).map(|j| exps[j] / total * v.get(ch, y, j) as f64).sum();
                out.set(ch, y, i, val as f32);
            }
        }
    }
    out
}
