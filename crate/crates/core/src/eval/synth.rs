//! Synthetic low-light generation: darken the HSV value channel, then add
//! seeded Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::raster::{hsv_to_rgb, rgb_to_hsv, ImageRgb};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    /// Multiplier on V, in `(0, 1]`.
    pub darken_factor: f64,
    /// Noise standard deviation in 8-bit units.
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            darken_factor: 0.2,
            noise_sigma: 5.0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.darken_factor > 0.0 && self.darken_factor <= 1.0) {
            return Err(EvalError::InvalidSynth(format!(
                "darken_factor must be in (0, 1], got {}",
                self.darken_factor
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(EvalError::InvalidSynth(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Scales the HSV value channel by `factor`, without noise or clamping.
pub fn darken_only(clean: &ImageRgb, factor: f64) -> ImageRgb {
    let mut hsv = rgb_to_hsv(clean);
    hsv.v = hsv.v.scale(factor);
    hsv_to_rgb(&hsv)
}

/// Darkens `clean`, adds `N(0, (noise_sigma/255)²)` noise drawn pixel by
/// pixel in row-major order (R, G, B per pixel) and clamps to `[0, 1]`.
pub fn synthesize_lowlight(clean: &ImageRgb, spec: &SynthSpec) -> Result<ImageRgb, EvalError> {
    spec.validate()?;
    let dark = darken_only(clean, spec.darken_factor);
    if spec.noise_sigma == 0.0 {
        return Ok(dark.clamp(0.0, 1.0));
    }
    let sd = spec.noise_sigma / 255.0;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let noisy = ImageRgb::from_fn(dark.height(), dark.width(), |r, c| {
        dark.pixel(r, c).map(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            (v + sd * n).clamp(0.0, 1.0)
        })
    });
    Ok(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::psnr;

    fn scene() -> ImageRgb {
        ImageRgb::from_fn(24, 24, |r, c| {
            [
                0.3 + 0.02 * r as f64,
                0.6 - 0.01 * c as f64,
                0.5 + 0.2 * ((r + c) as f64 * 0.3).sin(),
            ]
        })
    }

    #[test]
    fn unit_factor_without_noise_is_identity() {
        let img = scene();
        let spec = SynthSpec {
            darken_factor: 1.0,
            noise_sigma: 0.0,
            rng_seed: 1,
        };
        assert!(synthesize_lowlight(&img, &spec).unwrap().max_abs_diff(&img) < 1e-6);
    }

    #[test]
    fn gray_scales_linearly() {
        let img = ImageRgb::filled(5, 5, [0.5; 3]);
        let spec = SynthSpec {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let out = synthesize_lowlight(&img, &spec).unwrap();
        assert!(out.max_abs_diff(&ImageRgb::filled(5, 5, [0.1; 3])) < 1e-15);
    }

    #[test]
    fn noise_statistics() {
        let img = ImageRgb::filled(256, 256, [0.5; 3]);
        let spec = SynthSpec {
            rng_seed: 42,
            ..Default::default()
        };
        let out = synthesize_lowlight(&img, &spec).unwrap();
        let target = 5.0 / 255.0;
        for p in out.channels() {
            let sd = p.variance().sqrt();
            assert!((sd - target).abs() < 0.05 * target, "sd {sd}");
            assert!((p.mean() - 0.1).abs() < 1e-3);
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let img = scene();
        let spec = SynthSpec::default();
        let a = synthesize_lowlight(&img, &spec).unwrap();
        assert_eq!(
            a.to_rgba8(),
            synthesize_lowlight(&img, &spec).unwrap().to_rgba8()
        );
        let other = SynthSpec {
            rng_seed: 1,
            ..spec
        };
        assert_ne!(a, synthesize_lowlight(&img, &other).unwrap());
    }

    #[test]
    fn noise_lowers_psnr() {
        let img = scene();
        let noisy = synthesize_lowlight(&img, &SynthSpec::default()).unwrap();
        let dark = darken_only(&img, 0.2);
        assert!(psnr(&img, &noisy).unwrap() < psnr(&img, &dark).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let img = scene();
        for spec in [
            SynthSpec {
                darken_factor: 0.0,
                ..Default::default()
            },
            SynthSpec {
                darken_factor: 1.5,
                ..Default::default()
            },
            SynthSpec {
                noise_sigma: -1.0,
                ..Default::default()
            },
        ] {
            assert!(synthesize_lowlight(&img, &spec).is_err());
        }
    }
}
