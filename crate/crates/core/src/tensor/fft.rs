//! Unnormalized 2D DFT: radix-2 Cooley–Tukey for power-of-two lengths,
//! Bluestein's chirp-z for everything else. Computation is in f64; the
//! public [`ComplexGrid`] stores single precision.

use std::f64::consts::PI;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn cis(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }

    fn conj(self) -> C64 {
        C64::new(self.re, -self.im)
    }
}

/// Complex spectrum of a single-channel image.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    pub height: usize,
    pub width: usize,
    pub re: Vec<f32>,
    pub im: Vec<f32>,
}

impl ComplexGrid {
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.re[i], self.im[i])
    }

    fn from_c64(height: usize, width: usize, data: &[C64]) -> Self {
        Self {
            height,
            width,
            re: data.iter().map(|c| c.re as f32).collect(),
            im: data.iter().map(|c| c.im as f32).collect(),
        }
    }

    fn to_c64(&self) -> Vec<C64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| C64::new(r as f64, i as f64))
            .collect()
    }
}

/// Forward transform, `X[u,v] = Σ x[y,x]·exp(-2πi(uy/H + vx/W))`.
pub fn fft2d(input: &Tensor) -> Result<ComplexGrid> {
    if input.channels() != 1 {
        return Err(Error::shape(
            "fft2d",
            format!("expected a single-channel tensor, got {} channels", input.channels()),
        ));
    }
    let (h, w) = (input.height(), input.width());
    Ok(ComplexGrid::from_c64(h, w, &fft2d_f64(input.data(), h, w)))
}

/// Inverse transform scaled by `1/(H·W)`.
pub fn ifft2d(spectrum: &ComplexGrid) -> ComplexGrid {
    let (h, w) = (spectrum.height, spectrum.width);
    let mut data = spectrum.to_c64();
    transform_2d(&mut data, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    for c in &mut data {
        c.re *= scale;
        c.im *= scale;
    }
    ComplexGrid::from_c64(h, w, &data)
}

pub(crate) fn fft2d_f64(plane: &[f32], h: usize, w: usize) -> Vec<C64> {
    debug_assert_eq!(plane.len(), h * w);
    let mut data: Vec<C64> = plane.iter().map(|&v| C64::new(v as f64, 0.0)).collect();
    transform_2d(&mut data, h, w, false);
    data
}

fn transform_2d(data: &mut [C64], h: usize, w: usize, inverse: bool) {
    for row in data.chunks_mut(w) {
        fft_1d(row, inverse);
    }
    let mut column = vec![C64::ZERO; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        fft_1d(&mut column, inverse);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

/// Unnormalized 1D DFT in place; `inverse` flips the exponent sign only.
fn fft_1d(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        bluestein(buf, inverse);
    }
}

fn radix2(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<C64> = (0..half)
            .map(|k| C64::cis(sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half].mul(twiddles[k]);
                buf[start + k] = a.add(b);
                buf[start + k + half] = a.sub(b);
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    // exp(sign·πi·k²/n); k² reduced mod 2n keeps the angle small.
    let chirp: Vec<C64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            C64::cis(sign * PI * k2 / n as f64)
        })
        .collect();

    let mut a = vec![C64::ZERO; m];
    for k in 0..n {
        a[k] = buf[k].mul(chirp[k]);
    }
    let mut b = vec![C64::ZERO; m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = x.mul(*y);
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        let c = C64::new(a[k].re * scale, a[k].im * scale);
        buf[k] = c.mul(chirp[k]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(C64::ZERO, |acc, (j, &v)| {
                    acc.add(v.mul(C64::cis(-2.0 * PI * (j * k % n) as f64 / n as f64)))
                })
            })
            .collect()
    }

    #[test]
    fn one_dimensional_matches_naive_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 6, 7, 8, 12, 15, 16, 31, 45] {
            let x: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let expected = naive_dft(&x);
            let mut got = x.clone();
            fft_1d(&mut got, false);
            for (g, e) in got.iter().zip(&expected) {
                let d = g.sub(*e);
                assert!(d.re.hypot(d.im) < 1e-9, "n = {n}");
            }
        }
    }

    #[test]
    fn constant_image_is_dc_only() {
        let t = Tensor::full(1, 3, 5, 2.0);
        let g = fft2d(&t).unwrap();
        assert!((g.re[0] - 30.0).abs() < 1e-4);
        for i in 1..15 {
            assert!(g.re[i].abs() < 1e-4 && g.im[i].abs() < 1e-4);
        }
    }

    #[test]
    fn round_trip_non_power_of_two() {
        let t = Tensor::from_fn(1, 6, 10, |_, y, x| ((y * 10 + x) as f32 * 0.37).sin());
        let back = ifft2d(&fft2d(&t).unwrap());
        for (i, &v) in t.data().iter().enumerate() {
            assert!((back.re[i] - v).abs() < 1e-4);
            assert!(back.im[i].abs() < 1e-4);
        }
    }

    #[test]
    fn multi_channel_rejected() {
        assert!(fft2d(&Tensor::zeros(2, 4, 4)).is_err());
    }
}
