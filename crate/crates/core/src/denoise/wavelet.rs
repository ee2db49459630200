//! Multi-level orthonormal Haar shrinkage.
//!
//! Analysis, element-wise soft thresholding of every detail band at the
//! universal threshold `σ·√(2 ln n)`, then exact synthesis. With fixed Haar
//! filters this is the untrained form of a cascaded soft-threshold
//! autoencoder: the encoder and decoder filters are mutually inverse.

use std::f64::consts::FRAC_1_SQRT_2;

use super::DenoiseError;
use crate::raster::ImagePlane;
use crate::shrink::soft_shrink;

/// Deepest decomposition accepted.
pub const MAX_LEVELS: usize = 16;

/// Universal (VisuShrink) threshold for `n` samples at noise level `noise_sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletThreshold {
    pub noise_sigma: f64,
    pub n: usize,
    pub value: f64,
}

impl WaveletThreshold {
    pub fn new(noise_sigma: f64, n: usize) -> Self {
        let value = if noise_sigma == 0.0 || n < 2 {
            0.0
        } else {
            noise_sigma * (2.0 * (n as f64).ln()).sqrt()
        };
        Self {
            noise_sigma,
            n,
            value,
        }
    }
}

/// Half-sample symmetric index into `0..n` (`... 1 0 | 0 1 ... n-1 | n-1 n-2 ...`).
fn symmetric_index(i: usize, n: usize) -> usize {
    let m = i % (2 * n);
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn check_levels(levels: usize, height: usize, width: usize) -> Result<(), DenoiseError> {
    let fits = (1..=MAX_LEVELS).contains(&levels) && (1usize << levels) <= 2 * height.max(width);
    if fits {
        Ok(())
    } else {
        Err(DenoiseError::LevelsTooLarge {
            levels,
            height,
            width,
        })
    }
}

fn haar_pass(buf: &mut [f64], stride: usize, rh: usize, rw: usize, tmp: &mut Vec<f64>) {
    // rows
    let half = rw / 2;
    for r in 0..rh {
        let row = &mut buf[r * stride..r * stride + rw];
        tmp.clear();
        tmp.extend((0..half).map(|i| (row[2 * i] + row[2 * i + 1]) * FRAC_1_SQRT_2));
        tmp.extend((0..half).map(|i| (row[2 * i] - row[2 * i + 1]) * FRAC_1_SQRT_2));
        row.copy_from_slice(tmp);
    }
    // columns
    let half = rh / 2;
    for c in 0..rw {
        tmp.clear();
        tmp.extend(
            (0..half)
                .map(|i| (buf[2 * i * stride + c] + buf[(2 * i + 1) * stride + c]) * FRAC_1_SQRT_2),
        );
        tmp.extend(
            (0..half)
                .map(|i| (buf[2 * i * stride + c] - buf[(2 * i + 1) * stride + c]) * FRAC_1_SQRT_2),
        );
        for (r, &v) in tmp.iter().enumerate() {
            buf[r * stride + c] = v;
        }
    }
}

fn haar_unpass(buf: &mut [f64], stride: usize, rh: usize, rw: usize, tmp: &mut Vec<f64>) {
    let half = rh / 2;
    for c in 0..rw {
        tmp.clear();
        for i in 0..half {
            let s = buf[i * stride + c];
            let d = buf[(half + i) * stride + c];
            tmp.push((s + d) * FRAC_1_SQRT_2);
            tmp.push((s - d) * FRAC_1_SQRT_2);
        }
        for (r, &v) in tmp.iter().enumerate() {
            buf[r * stride + c] = v;
        }
    }
    let half = rw / 2;
    for r in 0..rh {
        let row = &mut buf[r * stride..r * stride + rw];
        tmp.clear();
        for i in 0..half {
            let (s, d) = (row[i], row[half + i]);
            tmp.push((s + d) * FRAC_1_SQRT_2);
            tmp.push((s - d) * FRAC_1_SQRT_2);
        }
        row.copy_from_slice(tmp);
    }
}

fn require_divisible(plane: &ImagePlane, levels: usize) -> Result<(), DenoiseError> {
    check_levels(levels, plane.height(), plane.width())?;
    let block = 1usize << levels;
    if !plane.height().is_multiple_of(block) || !plane.width().is_multiple_of(block) {
        return Err(DenoiseError::InvalidParameter {
            name: "levels",
            reason: format!(
                "{}x{} is not divisible by 2^{levels}",
                plane.height(),
                plane.width()
            ),
        });
    }
    Ok(())
}

/// Forward transform of a plane whose sides are multiples of `2^levels`.
/// The approximation band ends up in the top-left `(h >> levels, w >> levels)`
/// corner.
pub fn haar_decompose(plane: &ImagePlane, levels: usize) -> Result<ImagePlane, DenoiseError> {
    require_divisible(plane, levels)?;
    let (h, w) = plane.dims();
    let mut buf = plane.data().to_vec();
    let mut tmp = Vec::with_capacity(h.max(w));
    for j in 0..levels {
        haar_pass(&mut buf, w, h >> j, w >> j, &mut tmp);
    }
    Ok(ImagePlane::from_raw(h, w, buf))
}

/// Inverse of [`haar_decompose`].
pub fn haar_reconstruct(coeffs: &ImagePlane, levels: usize) -> Result<ImagePlane, DenoiseError> {
    require_divisible(coeffs, levels)?;
    let (h, w) = coeffs.dims();
    let mut buf = coeffs.data().to_vec();
    let mut tmp = Vec::with_capacity(h.max(w));
    for j in (0..levels).rev() {
        haar_unpass(&mut buf, w, h >> j, w >> j, &mut tmp);
    }
    Ok(ImagePlane::from_raw(h, w, buf))
}

/// Denoises one plane by Haar shrinkage at noise level `noise_sigma`.
///
/// The plane is symmetrically padded to the next multiple of `2^levels`;
/// the threshold uses the unpadded pixel count.
pub fn wavelet_shrink(
    plane: &ImagePlane,
    noise_sigma: f64,
    levels: usize,
) -> Result<ImagePlane, DenoiseError> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(DenoiseError::InvalidNoiseLevel(noise_sigma));
    }
    let (h, w) = plane.dims();
    check_levels(levels, h, w)?;
    let block = 1usize << levels;
    let ph = h.div_ceil(block) * block;
    let pw = w.div_ceil(block) * block;
    let padded = ImagePlane::from_fn(ph, pw, |r, c| {
        plane.get(symmetric_index(r, h), symmetric_index(c, w))
    });

    let threshold = WaveletThreshold::new(noise_sigma, h * w).value;
    let mut coeffs = haar_decompose(&padded, levels)?;
    let (ah, aw) = (ph >> levels, pw >> levels);
    {
        let data = coeffs.data_mut();
        for r in 0..ph {
            for c in 0..pw {
                if r >= ah || c >= aw {
                    let v = &mut data[r * pw + c];
                    *v = soft_shrink(*v, threshold);
                }
            }
        }
    }
    let out = haar_reconstruct(&coeffs, levels)?;
    Ok(ImagePlane::from_fn(h, w, |r, c| out.get(r, c)))
}
