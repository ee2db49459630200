//! Plug-and-play denoisers.
//!
//! Anything implementing [`Denoiser`] can be dropped into the reflectance
//! update. A [`DenoiserSpec`] names one of the bundled implementations and
//! carries its parameters so it can live in a JSON config.

mod external;
mod tv;
mod wavelet;

pub use external::{external_denoise, fresh_workdir, DEFAULT_TIMEOUT, WORKDIR_ENV};
pub use tv::{total_variation, tv_denoise};
pub use wavelet::{haar_decompose, haar_reconstruct, wavelet_shrink, WaveletThreshold, MAX_LEVELS};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ImageRgb, RasterError};

#[derive(Debug, Error)]
pub enum DenoiseError {
    #[error("invalid denoiser spec: {0}")]
    InvalidSpec(String),
    #[error("invalid denoiser parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("noise level must be non-negative and finite, got {0}")]
    InvalidNoiseLevel(f64),
    #[error("{levels} wavelet levels is too deep for a {height}x{width} plane")]
    LevelsTooLarge {
        levels: usize,
        height: usize,
        width: usize,
    },
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("external denoiser exited with status {0:?}")]
    ExitStatus(Option<i32>),
    #[error("external denoiser timed out after {0:?}")]
    Timeout(Duration),
    #[error("external denoiser produced no output at {0}")]
    MissingOutput(PathBuf),
    #[error("denoiser output is {actual:?}, expected {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("exchange file error: {0}")]
    Exchange(#[from] RasterError),
    #[error(transparent)]
    Io(std::io::Error),
}

/// A Gaussian denoiser `D(x, σ)`, with `σ` in `[0, 1]` intensity units.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, img: &ImageRgb, noise_level: f64) -> Result<ImageRgb, DenoiseError>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Identity,
    WaveletShrinkage,
    TotalVariation,
    External,
}

impl fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenoiserKind::Identity => "identity",
            DenoiserKind::WaveletShrinkage => "wavelet_shrinkage",
            DenoiserKind::TotalVariation => "total_variation",
            DenoiserKind::External => "external",
        })
    }
}

impl std::str::FromStr for DenoiserKind {
    type Err = DenoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "none" => Ok(DenoiserKind::Identity),
            "wavelet_shrinkage" | "wavelet" => Ok(DenoiserKind::WaveletShrinkage),
            "total_variation" | "tv" => Ok(DenoiserKind::TotalVariation),
            "external" => Ok(DenoiserKind::External),
            other => Err(DenoiseError::InvalidSpec(format!(
                "unknown denoiser kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

/// Which denoiser to use and with what parameters.
///
/// | kind | params |
/// |---|---|
/// | `identity` | none |
/// | `wavelet_shrinkage` | `levels` (1..=16, default 3) |
/// | `total_variation` | `weight_scale` (≥ 0, default 1; TV weight = scale × noise level), `iters` (≥ 1, default 50) |
/// | `external` | `command` (required), `workdir`, `timeout_secs` (default 120) |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        Self::wavelet(3)
    }
}

impl DenoiserSpec {
    pub fn new(kind: DenoiserKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::new(DenoiserKind::Identity)
    }

    pub fn wavelet(levels: usize) -> Self {
        Self::new(DenoiserKind::WaveletShrinkage).with("levels", levels as f64)
    }

    pub fn total_variation(weight_scale: f64, iters: usize) -> Self {
        Self::new(DenoiserKind::TotalVariation)
            .with("weight_scale", weight_scale)
            .with("iters", iters as f64)
    }

    pub fn external(command: &str) -> Self {
        Self::new(DenoiserKind::External).with("command", command)
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn allowed_params(&self) -> &'static [&'static str] {
        match self.kind {
            DenoiserKind::Identity => &[],
            DenoiserKind::WaveletShrinkage => &["levels"],
            DenoiserKind::TotalVariation => &["weight_scale", "iters"],
            DenoiserKind::External => &["command", "workdir", "timeout_secs"],
        }
    }

    fn number(&self, name: &'static str, default: f64) -> Result<f64, DenoiseError> {
        match self.params.get(name) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(DenoiseError::InvalidParameter {
                name,
                reason: format!("expected a finite number, got {other:?}"),
            }),
        }
    }

    fn count(
        &self,
        name: &'static str,
        default: usize,
        min: usize,
        max: usize,
    ) -> Result<usize, DenoiseError> {
        let v = self.number(name, default as f64)?;
        if v.fract() != 0.0 || v < min as f64 || v > max as f64 {
            return Err(DenoiseError::InvalidParameter {
                name,
                reason: format!("expected an integer in {min}..={max}, got {v}"),
            });
        }
        Ok(v as usize)
    }

    fn text(&self, name: &'static str) -> Result<Option<&str>, DenoiseError> {
        match self.params.get(name) {
            None => Ok(None),
            Some(ParamValue::Text(s)) => Ok(Some(s)),
            Some(other) => Err(DenoiseError::InvalidParameter {
                name,
                reason: format!("expected a string, got {other:?}"),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), DenoiseError> {
        self.build().map(|_| ())
    }

    /// Resolves this description into a runnable denoiser, validating every parameter.
    pub fn build(&self) -> Result<Box<dyn Denoiser>, DenoiseError> {
        let allowed = self.allowed_params();
        if let Some(key) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(DenoiseError::InvalidSpec(format!(
                "parameter `{key}` is not accepted by the {} denoiser",
                self.kind
            )));
        }
        Ok(match self.kind {
            DenoiserKind::Identity => Box::new(IdentityDenoiser),
            DenoiserKind::WaveletShrinkage => Box::new(WaveletDenoiser {
                levels: self.count("levels", 3, 1, MAX_LEVELS)?,
            }),
            DenoiserKind::TotalVariation => {
                let weight_scale = self.number("weight_scale", 1.0)?;
                if weight_scale < 0.0 {
                    return Err(DenoiseError::InvalidParameter {
                        name: "weight_scale",
                        reason: format!("must be non-negative, got {weight_scale}"),
                    });
                }
                Box::new(TvDenoiser {
                    weight_scale,
                    iters: self.count("iters", 50, 1, 100_000)?,
                })
            }
            DenoiserKind::External => {
                let command = self
                    .text("command")?
                    .filter(|c| !c.trim().is_empty())
                    .ok_or_else(|| {
                        DenoiseError::InvalidSpec("external denoiser requires a `command`".into())
                    })?
                    .to_string();
                let timeout_secs = self.number("timeout_secs", DEFAULT_TIMEOUT.as_secs_f64())?;
                if timeout_secs <= 0.0 {
                    return Err(DenoiseError::InvalidParameter {
                        name: "timeout_secs",
                        reason: format!("must be positive, got {timeout_secs}"),
                    });
                }
                Box::new(ExternalDenoiser {
                    command,
                    workdir: self.text("workdir")?.map(PathBuf::from),
                    timeout: Duration::from_secs_f64(timeout_secs),
                })
            }
        })
    }
}

/// Builds the denoiser described by `spec` and applies it once.
pub fn denoise(
    spec: &DenoiserSpec,
    img: &ImageRgb,
    noise_level: f64,
) -> Result<ImageRgb, DenoiseError> {
    spec.build()?.denoise(img, noise_level)
}

fn check_noise_level(noise_level: f64) -> Result<(), DenoiseError> {
    if noise_level >= 0.0 && noise_level.is_finite() {
        Ok(())
    } else {
        Err(DenoiseError::InvalidNoiseLevel(noise_level))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, img: &ImageRgb, noise_level: f64) -> Result<ImageRgb, DenoiseError> {
        check_noise_level(noise_level)?;
        Ok(img.clone())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Channel-wise Haar shrinkage.
#[derive(Debug, Clone, Copy)]
pub struct WaveletDenoiser {
    pub levels: usize,
}

impl Denoiser for WaveletDenoiser {
    fn denoise(&self, img: &ImageRgb, noise_level: f64) -> Result<ImageRgb, DenoiseError> {
        check_noise_level(noise_level)?;
        img.try_map_channels(|p| wavelet_shrink(p, noise_level, self.levels))
    }

    fn name(&self) -> &str {
        "wavelet_shrinkage"
    }
}

/// Channel-wise TV denoising with weight `weight_scale × noise_level`.
#[derive(Debug, Clone, Copy)]
pub struct TvDenoiser {
    pub weight_scale: f64,
    pub iters: usize,
}

impl Denoiser for TvDenoiser {
    fn denoise(&self, img: &ImageRgb, noise_level: f64) -> Result<ImageRgb, DenoiseError> {
        check_noise_level(noise_level)?;
        let weight = self.weight_scale * noise_level;
        Ok(img.map_channels(|p| tv_denoise(p, weight, self.iters)))
    }

    fn name(&self) -> &str {
        "total_variation"
    }
}

#[derive(Debug, Clone)]
pub struct ExternalDenoiser {
    pub command: String,
    /// Fixed exchange directory; a fresh one per call when `None`.
    pub workdir: Option<PathBuf>,
    pub timeout: Duration,
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, img: &ImageRgb, noise_level: f64) -> Result<ImageRgb, DenoiseError> {
        check_noise_level(noise_level)?;
        match &self.workdir {
            Some(dir) => external_denoise(&self.command, dir, img, noise_level, self.timeout),
            None => {
                let dir = fresh_workdir();
                let out = external_denoise(&self.command, &dir, img, noise_level, self.timeout);
                let _ = std::fs::remove_dir_all(&dir);
                out
            }
        }
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ImagePlane;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identity_returns_input_bitwise() {
        let img = ImageRgb::from_fn(3, 3, |r, c| [r as f64, c as f64, 0.1]);
        let out = denoise(&DenoiserSpec::identity(), &img, 0.5).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn wavelet_zero_noise_reproduces_input() {
        let img = ImageRgb::from_fn(9, 11, |r, c| [(r * c) as f64 / 99.0, 0.3, c as f64 / 11.0]);
        let out = denoise(&DenoiserSpec::wavelet(3), &img, 0.0).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-10);
    }

    #[test]
    fn wavelet_reduces_variance_of_noisy_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 25.0 / 255.0).unwrap();
        let plane = ImagePlane::from_fn(64, 64, |_, _| 0.5 + noise.sample(&mut rng));
        let img = ImageRgb::gray(plane);
        let out = denoise(&DenoiserSpec::wavelet(3), &img, 25.0 / 255.0).unwrap();
        for k in 0..3 {
            assert!(out.channel(k).variance() < img.channel(k).variance());
        }
    }

    #[test]
    fn spec_validation() {
        assert!(DenoiserSpec::new(DenoiserKind::External)
            .validate()
            .is_err());
        assert!(DenoiserSpec::external("  ").validate().is_err());
        assert!(DenoiserSpec::external("denoise.sh").validate().is_ok());
        assert!(DenoiserSpec::wavelet(0).validate().is_err());
        assert!(DenoiserSpec::wavelet(3)
            .with("levels", 2.5)
            .validate()
            .is_err());
        assert!(DenoiserSpec::total_variation(-1.0, 10).validate().is_err());
        assert!(DenoiserSpec::identity()
            .with("levels", 3.0)
            .validate()
            .is_err());
        assert!(DenoiserSpec::wavelet(3)
            .with("levels", "three")
            .validate()
            .is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec: DenoiserSpec = serde_json::from_str(
            r#"{"kind":"external","params":{"command":"run.sh","timeout_secs":5}}"#,
        )
        .unwrap();
        assert_eq!(spec.kind, DenoiserKind::External);
        assert_eq!(spec.params["timeout_secs"], ParamValue::Number(5.0));
        assert!(serde_json::from_str::<DenoiserSpec>(r#"{"kind":"identity","extra":1}"#).is_err());
    }

    #[test]
    fn negative_noise_level_rejected() {
        let img = ImageRgb::filled(2, 2, [0.1, 0.2, 0.3]);
        assert!(matches!(
            denoise(&DenoiserSpec::identity(), &img, -0.1),
            Err(DenoiseError::InvalidNoiseLevel(_))
        ));
    }

    #[test]
    fn bundled_denoisers_preserve_dimensions_and_are_deterministic() {
        let img = ImageRgb::from_fn(13, 7, |r, c| [((r * 7 + c) % 5) as f64 / 5.0, 0.4, 0.9]);
        for spec in [
            DenoiserSpec::identity(),
            DenoiserSpec::wavelet(2),
            DenoiserSpec::total_variation(1.0, 20),
        ] {
            let a = denoise(&spec, &img, 0.1).unwrap();
            let b = denoise(&spec, &img, 0.1).unwrap();
            assert_eq!(a.dims(), img.dims());
            assert_eq!(a, b);
        }
    }
}
