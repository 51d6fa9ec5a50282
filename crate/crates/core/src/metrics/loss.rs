//! Training objective evaluated on a stereo pair: pixel MSE plus a
//! Charbonnier penalty on the Fourier spectra.

use crate::error::{Error, Result};
use crate::model::StereoPair;
use crate::tensor::fft2d_f64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Weight of the frequency term.
    pub lambda: f64,
    /// Charbonnier smoothing constant.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            epsilon: 1e-3,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a finite value >= 0, got {}",
                self.lambda
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be a finite value > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn check(sr: &StereoPair, hr: &StereoPair, op: &'static str) -> Result<()> {
    if sr.left().shape() != hr.left().shape() {
        return Err(Error::shape(
            op,
            format!(
                "SR pair is {:?} but HR pair is {:?}",
                sr.left().shape(),
                hr.left().shape()
            ),
        ));
    }
    Ok(())
}

/// Mean squared error over every element of both views.
pub fn mse_loss(sr: &StereoPair, hr: &StereoPair) -> Result<f64> {
    check(sr, hr, "mse_loss")?;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (s, h) in [(sr.left(), hr.left()), (sr.right(), hr.right())] {
        for (&a, &b) in s.data().iter().zip(h.data()) {
            let d = b as f64 - a as f64;
            sum += d * d;
        }
        n += s.data().len();
    }
    Ok(sum / n as f64)
}

/// For each (view, channel) sample, `√(Σ|FFT(hr) − FFT(sr)|² + ε²)` with the
/// sum over all frequency bins; the result is the mean over the six samples.
pub fn freq_charbonnier_loss(sr: &StereoPair, hr: &StereoPair, epsilon: f64) -> Result<f64> {
    check(sr, hr, "freq_charbonnier_loss")?;
    let (h, w) = (sr.height(), sr.width());
    let eps2 = epsilon * epsilon;
    let mut total = 0.0f64;
    let mut samples = 0usize;
    for (s, t) in [(sr.left(), hr.left()), (sr.right(), hr.right())] {
        for c in 0..s.channels() {
            let fs = fft2d_f64(s.channel(c), h, w);
            let ft = fft2d_f64(t.channel(c), h, w);
            let dist: f64 = ft
                .iter()
                .zip(&fs)
                .map(|(a, b)| {
                    let (re, im) = (a.re - b.re, a.im - b.im);
                    re * re + im * im
                })
                .sum();
            total += (dist + eps2).sqrt();
            samples += 1;
        }
    }
    Ok(total / samples as f64)
}

/// `mse + λ · freq_charbonnier`.
pub fn total_loss(sr: &StereoPair, hr: &StereoPair, config: &LossConfig) -> Result<f64> {
    config.validate()?;
    let mse = mse_loss(sr, hr)?;
    let fc = freq_charbonnier_loss(sr, hr, config.epsilon)?;
    Ok(mse + config.lambda * fc)
}
