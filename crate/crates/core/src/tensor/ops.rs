use std::f64::consts::FRAC_1_SQRT_2;

use super::Tensor;
use crate::error::{Error, Result};

/// Exact (erf-based) GELU.
pub fn gelu_scalar(x: f32) -> f32 {
    let x = x as f64;
    (0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))) as f32
}

pub fn gelu(input: &Tensor) -> Tensor {
    map(input, gelu_scalar)
}

fn map(input: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    let (c, h, w) = input.shape();
    Tensor::from_parts_unchecked(c, h, w, input.data().iter().map(|&v| f(v)).collect())
}

fn zip_with(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
    a.ensure_same_shape(b, op)?;
    let (c, h, w) = a.shape();
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_parts_unchecked(c, h, w, data))
}

pub fn elementwise_add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "elementwise_add", |x, y| x + y)
}

pub fn elementwise_mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "elementwise_mul", |x, y| x * y)
}

pub fn scale(input: &Tensor, factor: f32) -> Tensor {
    map(input, |v| v * factor)
}

/// Multiplies channel `c` by `factors[c]`.
pub fn scale_channels(input: &Tensor, factors: &[f32]) -> Result<Tensor> {
    if factors.len() != input.channels() {
        return Err(Error::shape(
            "scale_channels",
            format!(
                "{} factors for {} channels",
                factors.len(),
                input.channels()
            ),
        ));
    }
    let n = input.plane_len();
    let data = input
        .data()
        .chunks(n)
        .zip(factors)
        .flat_map(|(plane, &f)| plane.iter().map(move |&v| v * f))
        .collect();
    let (c, h, w) = input.shape();
    Ok(Tensor::from_parts_unchecked(c, h, w, data))
}

/// Splits along channels into the first and second halves.
pub fn split_channels(input: &Tensor) -> Result<(Tensor, Tensor)> {
    let (c, h, w) = input.shape();
    if c % 2 != 0 {
        return Err(Error::shape(
            "split_channels",
            format!("channel count {c} is odd"),
        ));
    }
    let (a, b) = input.data().split_at(c / 2 * h * w);
    Ok((
        Tensor::from_parts_unchecked(c / 2, h, w, a.to_vec()),
        Tensor::from_parts_unchecked(c / 2, h, w, b.to_vec()),
    ))
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::shape(
            "concat_channels",
            format!("spatial size {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let mut data = Vec::with_capacity(a.data().len() + b.data().len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(Tensor::from_parts_unchecked(
        a.channels() + b.channels(),
        a.height(),
        a.width(),
        data,
    ))
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f64;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v as f64;
    }
    for v in row.iter_mut() {
        *v = (*v as f64 / sum) as f32;
    }
}

/// Softmax along each row of a row-major matrix with `row_len` columns.
pub fn softmax_rows(values: &[f32], row_len: usize) -> Result<Vec<f32>> {
    if row_len == 0 || values.len() % row_len != 0 {
        return Err(Error::shape(
            "softmax_rows",
            format!("{} values do not form rows of {row_len}", values.len()),
        ));
    }
    let mut out = values.to_vec();
    out.chunks_mut(row_len).for_each(softmax_in_place);
    Ok(out)
}

/// Bilinear resize by an integer factor with half-pixel centres
/// (align-corners disabled), edge samples clamped.
pub fn bilinear_upsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsample factor must be positive".into()));
    }
    let (c, h, w) = input.shape();
    let (oh, ow) = (h * factor, w * factor);
    let taps = |out_len: usize, in_len: usize| -> Vec<(usize, usize, f32)> {
        (0..out_len)
            .map(|o| {
                let src = ((o as f32 + 0.5) / factor as f32 - 0.5).max(0.0);
                let i0 = (src.floor() as usize).min(in_len - 1);
                let i1 = (i0 + 1).min(in_len - 1);
                (i0, i1, src - i0 as f32)
            })
            .collect()
    };
    let ys = taps(oh, h);
    let xs = taps(ow, w);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = input.channel(ch);
        for &(y0, y1, ly) in &ys {
            for &(x0, x1, lx) in &xs {
                let (a, b) = (plane[y0 * w + x0], plane[y0 * w + x1]);
                let (p, q) = (plane[y1 * w + x0], plane[y1 * w + x1]);
                // lerp form keeps constant regions exactly constant
                let top = a + lx * (b - a);
                let bottom = p + lx * (q - p);
                out.push(top + ly * (bottom - top));
            }
        }
    }
    Ok(Tensor::from_parts_unchecked(c, oh, ow, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_values() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert_eq!(gelu_scalar(100.0), 100.0);
        assert!((gelu_scalar(1.0) - 0.841_344_7).abs() < 1e-6);
        assert!((gelu_scalar(-1.0) + 0.158_655_25).abs() < 1e-6);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax_rows(&[0.0, 0.0], 2).unwrap(), vec![0.5, 0.5]);
        let s = softmax_rows(&[1000.0, 0.0], 2).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-6 && s[1].abs() < 1e-6);
        assert!(softmax_rows(&[1.0; 5], 2).is_err());
    }

    #[test]
    fn split_concat_round_trip() {
        let t = Tensor::from_fn(6, 2, 3, |c, y, x| (c * 6 + y * 3 + x) as f32);
        let (a, b) = split_channels(&t).unwrap();
        assert_eq!(a.channels(), 3);
        assert_eq!(concat_channels(&a, &b).unwrap(), t);
        assert!(split_channels(&Tensor::zeros(3, 1, 1)).is_err());
    }

    #[test]
    fn bilinear_constant_and_known_values() {
        let t = Tensor::full(3, 4, 5, 0.3);
        let up = bilinear_upsample(&t, 4).unwrap();
        assert_eq!(up.shape(), (3, 16, 20));
        assert!(up.data().iter().all(|&v| v == 0.3));

        // 1x2 row [0, 1] upsampled by 2: centres at -0.25 (clamped), 0.25, 0.75, 1.25.
        let r = Tensor::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let up = bilinear_upsample(&r, 2).unwrap();
        assert_eq!(up.channel(0)[..4], [0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn elementwise_shape_checks() {
        let a = Tensor::zeros(1, 2, 2);
        assert!(elementwise_add(&a, &Tensor::zeros(1, 2, 3)).is_err());
        assert!(scale_channels(&a, &[1.0, 2.0]).is_err());
        let s = scale_channels(&Tensor::full(2, 1, 2, 2.0), &[0.5, 3.0]).unwrap();
        assert_eq!(s.data(), &[1.0, 1.0, 6.0, 6.0]);
    }
}
