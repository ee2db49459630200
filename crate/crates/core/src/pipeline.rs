//! End-to-end enhancement: illumination, reflectance, gamma correction.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

use crate::config::{ConfigError, EnhanceConfig, GammaMode};
use crate::denoise::{DenoiseError, Denoiser};
use crate::grad::FftSolverPlan;
use crate::illumination::{estimate_illumination_with_plan, AdmmReport};
use crate::raster::{ImagePlane, ImageRgb};
use crate::reflectance::{run_hqs, HqsContext, ReflectanceError, ReflectanceReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Gradient,
    Illumination,
    Reflectance,
    Gamma,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Gradient => "gradient",
            Stage::Illumination => "illumination",
            Stage::Reflectance => "reflectance",
            Stage::Gamma => "gamma",
        })
    }
}

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("stage=config: {0}")]
    Config(#[from] ConfigError),
    #[error("stage=config: {0}")]
    DenoiserSetup(DenoiseError),
    #[error("stage={stage}: {source}")]
    Reflectance {
        stage: Stage,
        #[source]
        source: ReflectanceError,
    },
}

impl EnhanceError {
    pub fn stage(&self) -> Stage {
        match self {
            EnhanceError::Config(_) | EnhanceError::DenoiserSetup(_) => Stage::Config,
            EnhanceError::Reflectance { stage, .. } => *stage,
        }
    }
}

impl From<ReflectanceError> for EnhanceError {
    fn from(source: ReflectanceError) -> Self {
        let stage = match source {
            ReflectanceError::Gradient(_) => Stage::Gradient,
            _ => Stage::Reflectance,
        };
        EnhanceError::Reflectance { stage, source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Illumination in `[l_floor, 1]`.
    pub l: ImagePlane,
    /// Reflectance in `[0, r_ceil]`.
    pub r: ImageRgb,
    /// Gamma-corrected recombination in `[0, 1]`.
    pub enhanced: ImageRgb,
    pub illumination: AdmmReport,
    pub reflectance: ReflectanceReport,
}

/// Single mode: `R · L^{1/γ₂}`. Dual mode: `R^{1/γ₁} · L^{1/γ₂}`.
/// The result is clamped to `[0, 1]`.
pub fn gamma_correct(
    r: &ImageRgb,
    l: &ImagePlane,
    mode: GammaMode,
    gamma1: f64,
    gamma2: f64,
) -> ImageRgb {
    let lg = l.map(|v| v.powf(1.0 / gamma2));
    let rg = match mode {
        GammaMode::Single => r.clone(),
        GammaMode::Dual if gamma1 == 1.0 => r.clone(),
        GammaMode::Dual => r.map(|v| v.powf(1.0 / gamma1)),
    };
    rg.zip_plane(&lg, |a, b| (a * b).clamp(0.0, 1.0))
}

/// FFT plans shared across calls, keyed by `(height, width)`.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: RwLock<HashMap<(usize, usize), Arc<FftSolverPlan>>>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, height: usize, width: usize) -> Arc<FftSolverPlan> {
        if let Some(plan) = self
            .plans
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&(height, width))
        {
            return plan.clone();
        }
        let mut plans = self.plans.write().unwrap_or_else(|e| e.into_inner());
        plans
            .entry((height, width))
            .or_insert_with(|| Arc::new(FftSolverPlan::new(height, width)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.plans.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Process-wide plan cache.
pub fn shared_plans() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(PlanCache::new)
}

/// A decomposition plus the unclamped reflectance iterates `R⁽⁰⁾ … R⁽ᴷ⁾`.
#[derive(Debug, Clone)]
pub struct RecordedRun {
    pub result: DecompositionResult,
    pub snapshots: Vec<ImageRgb>,
}

/// Enhances `s` with the denoiser described by `cfg.denoiser`.
pub fn enhance(s: &ImageRgb, cfg: &EnhanceConfig) -> Result<DecompositionResult, EnhanceError> {
    cfg.validate()?;
    let denoiser = cfg.denoiser.build().map_err(EnhanceError::DenoiserSetup)?;
    enhance_with(s, cfg, denoiser.as_ref())
}

/// Enhances `s` with an explicit denoiser; `cfg.denoiser` is ignored.
pub fn enhance_with(
    s: &ImageRgb,
    cfg: &EnhanceConfig,
    denoiser: &dyn Denoiser,
) -> Result<DecompositionResult, EnhanceError> {
    run_pipeline(s, cfg, denoiser, false).map(|run| run.result)
}

/// Like [`enhance_with`], also returning every reflectance iterate.
pub fn enhance_recording(
    s: &ImageRgb,
    cfg: &EnhanceConfig,
    denoiser: &dyn Denoiser,
) -> Result<RecordedRun, EnhanceError> {
    run_pipeline(s, cfg, denoiser, true)
}

fn run_pipeline(
    s: &ImageRgb,
    cfg: &EnhanceConfig,
    denoiser: &dyn Denoiser,
    record: bool,
) -> Result<RecordedRun, EnhanceError> {
    cfg.validate()?;
    let plan = shared_plans().get(s.height(), s.width());
    let (l, illumination) = estimate_illumination_with_plan(s, cfg, &plan);
    let ctx = HqsContext::new(s, &l, &plan, denoiser, cfg).map_err(ReflectanceError::from)?;
    let hqs = run_hqs(&ctx, record)?;
    let enhanced = gamma_correct(&hqs.reflectance, &l, cfg.gamma_mode, cfg.gamma1, cfg.gamma2);
    Ok(RecordedRun {
        result: DecompositionResult {
            l,
            r: hqs.reflectance,
            enhanced,
            illumination,
            reflectance: hqs.report,
        },
        snapshots: hqs.snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::DenoiserSpec;

    fn identity_cfg() -> EnhanceConfig {
        EnhanceConfig {
            alpha: 0.0,
            beta: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
            denoiser: DenoiserSpec::identity(),
            ..Default::default()
        }
    }

    #[test]
    fn gamma_with_unit_illumination() {
        let r = ImageRgb::filled(2, 2, [0.25, 0.81, 1.5]);
        let l = ImagePlane::filled(2, 2, 1.0);
        let out = gamma_correct(&r, &l, GammaMode::Dual, 2.0, 2.2);
        assert!(out.max_abs_diff(&ImageRgb::filled(2, 2, [0.5, 0.9, 1.0])) < 1e-15);
    }

    #[test]
    fn gamma_scalar_value() {
        let r = ImageRgb::filled(1, 1, [1.0; 3]);
        let l = ImagePlane::filled(1, 1, 0.25);
        let out = gamma_correct(&r, &l, GammaMode::Single, 1.0, 2.2);
        let expected = 0.25f64.powf(1.0 / 2.2);
        assert!((out.channel(0).get(0, 0) - expected).abs() < 1e-15);
        assert!((expected - 0.5325).abs() < 1e-4);
    }

    #[test]
    fn unit_gammas_reconstruct() {
        let r = ImageRgb::from_fn(3, 3, |i, j| [0.1 * i as f64, 0.2 * j as f64, 2.0]);
        let l = ImagePlane::from_fn(3, 3, |i, j| 0.2 + 0.1 * (i + j) as f64);
        let out = gamma_correct(&r, &l, GammaMode::Dual, 1.0, 1.0);
        let expected = r.zip_plane(&l, |a, b| (a * b).clamp(0.0, 1.0));
        assert_eq!(out, expected);
    }

    #[test]
    fn single_mode_ignores_gamma1() {
        let r = ImageRgb::filled(2, 2, [0.3, 0.6, 0.9]);
        let l = ImagePlane::filled(2, 2, 0.4);
        assert_eq!(
            gamma_correct(&r, &l, GammaMode::Single, 7.0, 2.2),
            gamma_correct(&r, &l, GammaMode::Dual, 1.0, 2.2)
        );
    }

    #[test]
    fn white_input_is_fixed() {
        let s = ImageRgb::filled(8, 8, [1.0; 3]);
        let out = enhance(&s, &identity_cfg()).unwrap();
        assert!(out.enhanced.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn dark_constant_is_lifted_by_gamma() {
        let s = ImageRgb::filled(8, 8, [0.25; 3]);
        let cfg = EnhanceConfig {
            gamma1: 1.0,
            gamma2: 2.2,
            gamma_mode: GammaMode::Single,
            ..identity_cfg()
        };
        let out = enhance(&s, &cfg).unwrap();
        let expected = 0.25f64.powf(1.0 / 2.2);
        assert!(out
            .enhanced
            .channels()
            .iter()
            .all(|p| p.data().iter().all(|&v| (v - expected).abs() < 1e-12)));
    }

    #[test]
    fn identity_pipeline_returns_input() {
        let s = ImageRgb::from_fn(9, 11, |r, c| {
            let t = (r * 11 + c) as f64 / 99.0;
            [t, 1.0 - t, (t * 7.0).sin().abs()]
        });
        let out = enhance(&s, &identity_cfg()).unwrap();
        assert!(out.enhanced.max_abs_diff(&s.clamp(0.0, 1.0)) < 1e-8);
    }

    #[test]
    fn invalid_config_is_tagged() {
        let s = ImageRgb::filled(4, 4, [0.5; 3]);
        let cfg = EnhanceConfig {
            rho: 0.5,
            ..Default::default()
        };
        let err = enhance(&s, &cfg).unwrap_err();
        assert_eq!(err.stage(), Stage::Config);
    }

    #[test]
    fn plan_cache_reuses_plans() {
        let cache = PlanCache::new();
        let a = cache.get(4, 6);
        let b = cache.get(4, 6);
        assert!(Arc::ptr_eq(&a, &b));
        cache.get(6, 4);
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn recording_matches_plain_run() {
        let s = ImageRgb::from_fn(12, 12, |r, c| {
            [0.05 + 0.01 * r as f64, 0.1, 0.02 * c as f64]
        });
        let cfg = EnhanceConfig::default();
        let den = cfg.denoiser.build().unwrap();
        let plain = enhance_with(&s, &cfg, den.as_ref()).unwrap();
        let rec = enhance_recording(&s, &cfg, den.as_ref()).unwrap();
        assert_eq!(plain, rec.result);
        assert_eq!(rec.snapshots.len(), plain.reflectance.iterations + 1);
    }
}
