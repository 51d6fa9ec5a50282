//! PSNR and SSIM on RGB images with data range 1.0, no border cropping.

use crate::error::{Error, Result};
use crate::model::StereoPair;
use crate::tensor::Tensor;

/// PSNR substituted for an infinite value when averaging.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10·log10(1 / MSE)` over all elements; `f64::INFINITY` for identical inputs.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "psnr")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sum / a.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

pub(crate) fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a row-major plane with a 1D kernel.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f32], b: &[f32], h: usize, w: usize, k: &[f64]) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(&a, h, w, k);
    let mu_b = filter_valid(&b, h, w, k);
    let e_aa = filter_valid(&aa, h, w, k);
    let e_bb = filter_valid(&bb, h, w, k);
    let e_ab = filter_valid(&ab, h, w, k);

    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / n as f64
}

/// Mean SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03) per
/// channel over the valid window positions, averaged over channels.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (c, h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(
            "ssim",
            format!("image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }
    let k = gaussian_window();
    let sum: f64 = (0..c)
        .map(|ch| ssim_plane(a.channel(ch), b.channel(ch), h, w, &k))
        .sum();
    Ok(sum / c as f64)
}

fn capped(v: f64) -> f64 {
    if v.is_infinite() {
        PSNR_CAP_DB
    } else {
        v
    }
}

/// Mean of two PSNR values; infinite only when both are.
pub fn mean_psnr(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        f64::INFINITY
    } else {
        (capped(a) + capped(b)) / 2.0
    }
}

/// Metrics for one stereo image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMetrics {
    pub scene: String,
    pub psnr_left: f64,
    pub ssim_left: f64,
    pub psnr_right: f64,
    pub ssim_right: f64,
    /// `(left + right) / 2`.
    pub psnr_pair: f64,
    pub ssim_pair: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub images: Vec<ImageMetrics>,
}

/// Dataset means; infinite PSNRs count as [`PSNR_CAP_DB`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub psnr_left: f64,
    pub ssim_left: f64,
    pub psnr_pair: f64,
    pub ssim_pair: f64,
}

impl EvalReport {
    pub fn aggregate(&self) -> Option<Aggregate> {
        if self.images.is_empty() {
            return None;
        }
        let n = self.images.len() as f64;
        let mean = |f: &dyn Fn(&ImageMetrics) -> f64| self.images.iter().map(f).sum::<f64>() / n;
        Some(Aggregate {
            psnr_left: mean(&|m| capped(m.psnr_left)),
            ssim_left: mean(&|m| m.ssim_left),
            psnr_pair: mean(&|m| capped(m.psnr_pair)),
            ssim_pair: mean(&|m| m.ssim_pair),
        })
    }
}

pub fn stereo_eval(scene: &str, sr: &StereoPair, hr: &StereoPair) -> Result<ImageMetrics> {
    let psnr_left = psnr(sr.left(), hr.left())?;
    let psnr_right = psnr(sr.right(), hr.right())?;
    let ssim_left = ssim(sr.left(), hr.left())?;
    let ssim_right = ssim(sr.right(), hr.right())?;
    Ok(ImageMetrics {
        scene: scene.to_string(),
        psnr_left,
        ssim_left,
        psnr_right,
        ssim_right,
        psnr_pair: mean_psnr(psnr_left, psnr_right),
        ssim_pair: (ssim_left + ssim_right) / 2.0,
    })
}
