use super::Tensor;
use crate::error::{Error, Result};

/// Rearranges `r²` channel groups into an `r×` larger grid:
/// `out[c, y·r+i, x·r+j] = in[c·r² + i·r + j, y, x]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let (c, h, w) = input.shape();
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::shape(
            "pixel_shuffle",
            format!("channels {c} not divisible by r² = {}", r * r),
        ));
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let src = input.data();
    let mut out = vec![0.0f32; src.len()];
    for co in 0..oc {
        for i in 0..r {
            for j in 0..r {
                let ci = co * r * r + i * r + j;
                for y in 0..h {
                    let srow = &src[(ci * h + y) * w..(ci * h + y + 1) * w];
                    let orow = (co * oh + y * r + i) * ow;
                    for (x, &v) in srow.iter().enumerate() {
                        out[orow + x * r + j] = v;
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts_unchecked(oc, oh, ow, out))
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let (c, h, w) = input.shape();
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::shape(
            "pixel_unshuffle",
            format!("spatial size {h}x{w} not divisible by r = {r}"),
        ));
    }
    let (ih, iw) = (h / r, w / r);
    Ok(Tensor::from_fn(c * r * r, ih, iw, |ci, y, x| {
        let (co, rem) = (ci / (r * r), ci % (r * r));
        input.get(co, y * r + rem / r, x * r + rem % r)
    }))
}
