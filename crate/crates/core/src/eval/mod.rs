//! Image quality metrics and synthetic low-light data.

mod metrics;
mod synth;

use thiserror::Error;

pub use metrics::{
    evaluate, format_metric, gaussian_taps, lenient_f64, mean_std, mse, psnr, psnr_from_mse, ssim,
    MetricReport, MetricStats, MetricTable, NamedReport, SSIM_SIGMA, SSIM_WINDOW,
};
pub use synth::{darken_only, synthesize_lowlight, SynthSpec};

use crate::illumination::max_rgb;
use crate::raster::ImageRgb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{height}x{width} image is smaller than the {window}x{window} window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("invalid synthesis spec: {0}")]
    InvalidSynth(String),
}

/// Mean of the HSV value channel.
pub fn mean_brightness(img: &ImageRgb) -> f64 {
    max_rgb(img).mean()
}
