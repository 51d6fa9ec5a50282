//! Losses and image-quality metrics.

mod loss;
mod quality;

pub use loss::{freq_charbonnier_loss, mse_loss, total_loss, LossConfig};
pub use quality::{
    mean_psnr, psnr, ssim, stereo_eval, Aggregate, EvalReport, ImageMetrics, PSNR_CAP_DB,
    SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
