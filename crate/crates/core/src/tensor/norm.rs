use super::Tensor;
use crate::error::{Error, Result};

/// Stabilizer added to the variance under the square root.
pub const LAYER_NORM_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl LayerNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        layer_norm_channel(input, &self.gamma, &self.beta)
    }
}

/// Normalizes the channel vector at every spatial position to zero mean and
/// unit (population) variance, then applies the per-channel affine.
pub fn layer_norm_channel(input: &Tensor, gamma: &[f32], beta: &[f32]) -> Result<Tensor> {
    let c = input.channels();
    if gamma.len() != c || beta.len() != c {
        return Err(Error::shape(
            "layer_norm_channel",
            format!(
                "gamma/beta lengths {}/{} do not match channels {c}",
                gamma.len(),
                beta.len()
            ),
        ));
    }
    let n = input.plane_len();
    let data = input.data();

    let mut mean = vec![0.0f64; n];
    for ch in 0..c {
        for (m, &v) in mean.iter_mut().zip(&data[ch * n..(ch + 1) * n]) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= c as f64;
    }
    let mut var = vec![0.0f64; n];
    for ch in 0..c {
        for ((s, &v), &m) in var.iter_mut().zip(&data[ch * n..(ch + 1) * n]).zip(&mean) {
            let d = v as f64 - m;
            *s += d * d;
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|&s| 1.0 / (s / c as f64 + LAYER_NORM_EPS).sqrt())
        .collect();

    let mut out = vec![0.0f32; data.len()];
    for ch in 0..c {
        let (g, b) = (gamma[ch] as f64, beta[ch] as f64);
        let src = &data[ch * n..(ch + 1) * n];
        let dst = &mut out[ch * n..(ch + 1) * n];
        for i in 0..n {
            dst[i] = ((src[i] as f64 - mean[i]) * inv_std[i] * g + b) as f32;
        }
    }
    Ok(Tensor::from_parts_unchecked(c, input.height(), input.width(), out))
}
