//! Browser bindings: enhancement, synthetic low-light generation and
//! scoring over RGBA canvas buffers.
//!
//! Every buffer is row-major RGBA8 of length `4 · width · height`. Alpha is
//! ignored on input and written as 255.

use pnp_retinex::eval::{psnr, ssim};
use pnp_retinex::scenes::{scene, SCENE_KINDS};
use pnp_retinex::{
    enhance as run_enhance, synthesize_lowlight as run_synth, DenoiserSpec, EnhanceConfig,
    ImagePlane, ImageRgb, SynthSpec,
};
use wasm_bindgen::prelude::*;

/// Side length cap; larger canvases should be downscaled by the page.
pub const MAX_SIDE: usize = 1024;

fn decode(width: usize, height: usize, rgba: &[u8]) -> Result<ImageRgb, String> {
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(format!(
            "image must be between 1 and {MAX_SIDE} pixels per side, got {width}x{height}"
        ));
    }
    ImageRgb::from_rgba8(width, height, rgba).map_err(|e| e.to_string())
}

fn gray_rgba(plane: &ImagePlane) -> Vec<u8> {
    ImageRgb::gray(plane.clone()).to_rgba8()
}

/// Enhancement settings exposed on the page.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// 0 identity, 1 wavelet shrinkage, 2 total variation.
    pub denoiser: u8,
    /// 8-bit units.
    pub noise_level: f64,
}

impl Settings {
    pub fn to_config(self) -> Result<EnhanceConfig, String> {
        let mut cfg = EnhanceConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            noise_level: self.noise_level / 255.0,
            ..EnhanceConfig::default()
        };
        cfg.denoiser = match self.denoiser {
            0 => DenoiserSpec::identity(),
            1 => DenoiserSpec::default(),
            2 => DenoiserSpec::total_variation(1.0, 50),
            other => return Err(format!("unknown denoiser index {other}")),
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

/// Layers of one enhancement run, each as RGBA8.
#[wasm_bindgen]
pub struct Enhanced {
    enhanced: Vec<u8>,
    illumination: Vec<u8>,
    reflectance: Vec<u8>,
    admm_iterations: usize,
    hqs_iterations: usize,
}

#[wasm_bindgen]
impl Enhanced {
    #[wasm_bindgen(getter)]
    pub fn enhanced(&self) -> Vec<u8> {
        self.enhanced.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn illumination(&self) -> Vec<u8> {
        self.illumination.clone()
    }

    /// Clamped to `[0, 1]` for display.
    #[wasm_bindgen(getter)]
    pub fn reflectance(&self) -> Vec<u8> {
        self.reflectance.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn admm_iterations(&self) -> usize {
        self.admm_iterations
    }

    #[wasm_bindgen(getter)]
    pub fn hqs_iterations(&self) -> usize {
        self.hqs_iterations
    }
}

pub fn enhance_image(
    width: usize,
    height: usize,
    rgba: &[u8],
    settings: Settings,
) -> Result<Enhanced, String> {
    let img = decode(width, height, rgba)?;
    let cfg = settings.to_config()?;
    let out = run_enhance(&img, &cfg).map_err(|e| e.to_string())?;
    Ok(Enhanced {
        enhanced: out.enhanced.to_rgba8(),
        illumination: gray_rgba(&out.l),
        reflectance: out.r.clamp(0.0, 1.0).to_rgba8(),
        admm_iterations: out.illumination.iterations,
        hqs_iterations: out.reflectance.iterations,
    })
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn enhance(
    width: usize,
    height: usize,
    rgba: &[u8],
    alpha: f64,
    beta: f64,
    gamma1: f64,
    gamma2: f64,
    denoiser: u8,
    noise_level: f64,
) -> Result<Enhanced, JsError> {
    let settings = Settings {
        alpha,
        beta,
        gamma1,
        gamma2,
        denoiser,
        noise_level,
    };
    enhance_image(width, height, rgba, settings).map_err(|e| JsError::new(&e))
}

pub fn synthesize_image(
    width: usize,
    height: usize,
    rgba: &[u8],
    darken: f64,
    noise_sigma: f64,
    seed: u32,
) -> Result<Vec<u8>, String> {
    let img = decode(width, height, rgba)?;
    let spec = SynthSpec {
        darken_factor: darken,
        noise_sigma,
        rng_seed: u64::from(seed),
    };
    run_synth(&img, &spec)
        .map(|low| low.to_rgba8())
        .map_err(|e| e.to_string())
}

/// Darkens and adds seeded noise; same result as the `synth` command.
#[wasm_bindgen]
pub fn synthesize_lowlight(
    width: usize,
    height: usize,
    rgba: &[u8],
    darken: f64,
    noise_sigma: f64,
    seed: u32,
) -> Result<Vec<u8>, JsError> {
    synthesize_image(width, height, rgba, darken, noise_sigma, seed).map_err(|e| JsError::new(&e))
}

pub fn score_images(
    width: usize,
    height: usize,
    result: &[u8],
    reference: &[u8],
) -> Result<[f64; 2], String> {
    let a = decode(width, height, result)?;
    let b = decode(width, height, reference)?;
    let p = psnr(&a, &b).map_err(|e| e.to_string())?;
    // SSIM needs an 11-pixel window; report NaN below that.
    let s = ssim(&a, &b).unwrap_or(f64::NAN);
    Ok([p, s])
}

/// `[psnr, ssim]` of `result` against `reference`.
#[wasm_bindgen]
pub fn score(
    width: usize,
    height: usize,
    result: &[u8],
    reference: &[u8],
) -> Result<Vec<f64>, JsError> {
    score_images(width, height, result, reference)
        .map(|s| s.to_vec())
        .map_err(|e| JsError::new(&e))
}

/// A procedural test scene, so the page works without an upload.
#[wasm_bindgen]
pub fn demo_scene(kind: usize, size: usize, seed: u32) -> Vec<u8> {
    let size = size.clamp(8, MAX_SIDE);
    scene(kind % SCENE_KINDS, size, size, u64::from(seed)).to_rgba8()
}

#[wasm_bindgen]
pub fn scene_kinds() -> usize {
    SCENE_KINDS
}
