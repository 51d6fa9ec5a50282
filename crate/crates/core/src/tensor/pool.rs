use super::Tensor;
use crate::error::{Error, Result};

/// Per-channel arithmetic mean, shape (C, 1, 1).
pub fn global_avg_pool(input: &Tensor) -> Tensor {
    let n = input.plane_len() as f64;
    let w = input.width();
    let means = (0..input.channels())
        .map(|c| {
            // Row sums accumulated row by row, the same order the integral
            // image in `local_avg_pool` uses, so full-coverage windows agree
            // bit for bit.
            let total = input
                .channel(c)
                .chunks(w)
                .fold(0.0f64, |acc, row| acc + row.iter().fold(0.0f64, |s, &v| s + v as f64));
            (total / n) as f32
        })
        .collect();
    Tensor::from_parts_unchecked(input.channels(), 1, 1, means)
}

/// Mean over a `window_h × window_w` window centred at each position,
/// clipped to the image bounds. For even windows the extra row/column lies
/// after the centre.
pub fn local_avg_pool(input: &Tensor, window_h: usize, window_w: usize) -> Result<Tensor> {
    if window_h == 0 || window_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "pooling window must be positive, got {window_h}x{window_w}"
        )));
    }
    let (c, h, w) = input.shape();
    let (up, down) = ((window_h - 1) / 2, window_h / 2);
    let (left, right) = ((window_w - 1) / 2, window_w / 2);
    let stride = w + 1;
    let mut integral = vec![0.0f64; (h + 1) * stride];
    let mut out = Vec::with_capacity(c * h * w);

    for ch in 0..c {
        let plane = input.channel(ch);
        for y in 0..h {
            let mut row = 0.0f64;
            for x in 0..w {
                row += plane[y * w + x] as f64;
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
            }
        }
        for y in 0..h {
            let y0 = y.saturating_sub(up);
            let y1 = (y + down + 1).min(h);
            for x in 0..w {
                let x0 = x.saturating_sub(left);
                let x1 = (x + right + 1).min(w);
                let sum = integral[y1 * stride + x1] - integral[y0 * stride + x1]
                    - integral[y1 * stride + x0]
                    + integral[y0 * stride + x0];
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                out.push((sum / count) as f32);
            }
        }
    }
    Ok(Tensor::from_parts_unchecked(c, h, w, out))
}
