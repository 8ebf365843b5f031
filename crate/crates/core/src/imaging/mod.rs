//! Images, degradation, quality metrics and noise-level estimation.

mod degrade;
mod metrics;
mod noise;
mod png_io;
pub mod synthetic;
mod tensor;

pub use degrade::{degrade, degrade_with_rng, DegradationConfig, NoiseLevel};
pub use metrics::{psnr, ssim, ssim_grad, ssim_with_grad, MetricOptions, SSIM_C1, SSIM_C2};
pub use noise::{estimate_noise_std, MAD_CONSISTENCY};
pub use png_io::{load_png, save_png};
pub use tensor::ImageTensor;
