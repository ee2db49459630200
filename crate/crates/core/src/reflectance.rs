//! Reflectance estimation by half-quadratic splitting.
//!
//! With `L` fixed, the reflectance objective
//! `‖S − L·R‖² + λΦ(R) + β‖∇R − G‖²` is split with an auxiliary `z ≈ R`:
//!
//! ```text
//! z ← (2β∇ᵀ∇ + μI)⁻¹ (2β∇ᵀG + μR)
//! R ← D((2S·L + μz) / (2L² + μ), √λ)
//! ```
//!
//! where `D` is any Gaussian denoiser. Every update runs per color channel.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::EnhanceConfig;
use crate::denoise::{DenoiseError, Denoiser};
use crate::grad::{
    adjusted_gradient, gradient_transpose, solve_screened_poisson, FftSolverPlan, GradError,
    GradientField, SolverError,
};
use crate::raster::{ImagePlane, ImageRgb};

#[derive(Debug, Error)]
pub enum ReflectanceError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Gradient(#[from] GradError),
    #[error("denoiser failed at iteration {iteration}: {source}")]
    Denoiser {
        iteration: usize,
        #[source]
        source: DenoiseError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HqsState {
    pub r: ImageRgb,
    pub z: ImageRgb,
    pub mu: f64,
    pub iter: usize,
}

/// `R⁽⁰⁾ = S / L`, unclamped. `L` is floored at `l_floor` before dividing.
pub fn init_reflectance(s: &ImageRgb, l: &ImagePlane, l_floor: f64) -> ImageRgb {
    s.zip_plane(l, |sv, lv| sv / lv.max(l_floor))
}

/// Adjusted gradient map of every channel of `s`.
pub fn channel_gradient_maps(
    s: &ImageRgb,
    eps: f64,
    kappa: f64,
    sigma: f64,
) -> Result<[GradientField; 3], GradError> {
    let [r, g, b] = s.channels();
    Ok([
        adjusted_gradient(r, eps, kappa, sigma)?,
        adjusted_gradient(g, eps, kappa, sigma)?,
        adjusted_gradient(b, eps, kappa, sigma)?,
    ])
}

pub fn hqs_update_z(
    r: &ImageRgb,
    g: &[GradientField; 3],
    beta: f64,
    mu: f64,
    plan: &FftSolverPlan,
) -> Result<ImageRgb, SolverError> {
    let mut k = 0;
    r.try_map_channels(|rc| {
        let rhs = gradient_transpose(&g[k])
            .scale(2.0 * beta)
            .add(&rc.scale(mu));
        k += 1;
        solve_screened_poisson(plan, mu, 2.0 * beta, &rhs)
    })
}

/// `(2S·L + μz) / (2L² + μ)` per channel.
pub fn denoiser_argument(s: &ImageRgb, l: &ImagePlane, z: &ImageRgb, mu: f64) -> ImageRgb {
    let two_sl = s.zip_plane(l, |sv, lv| 2.0 * sv * lv);
    two_sl
        .zip_map(z, |a, zv| a + mu * zv)
        .zip_plane(l, |num, lv| num / (2.0 * lv * lv + mu))
}

/// Everything one HQS step needs besides the current reflectance.
pub struct HqsContext<'a> {
    pub s: &'a ImageRgb,
    pub l: &'a ImagePlane,
    pub g: [GradientField; 3],
    pub plan: &'a FftSolverPlan,
    pub denoiser: &'a dyn Denoiser,
    pub cfg: &'a EnhanceConfig,
}

impl<'a> HqsContext<'a> {
    pub fn new(
        s: &'a ImageRgb,
        l: &'a ImagePlane,
        plan: &'a FftSolverPlan,
        denoiser: &'a dyn Denoiser,
        cfg: &'a EnhanceConfig,
    ) -> Result<Self, GradError> {
        Ok(Self {
            s,
            l,
            g: channel_gradient_maps(s, cfg.eps, cfg.kappa, cfg.sigma)?,
            plan,
            denoiser,
            cfg,
        })
    }

    /// One z-update followed by one denoiser R-update. `iteration` only
    /// labels errors.
    pub fn step(
        &self,
        r: &ImageRgb,
        iteration: usize,
    ) -> Result<(ImageRgb, ImageRgb), ReflectanceError> {
        let z = hqs_update_z(r, &self.g, self.cfg.beta, self.cfg.mu, self.plan)?;
        let arg = denoiser_argument(self.s, self.l, &z, self.cfg.mu);
        let r_next = self
            .denoiser
            .denoise(&arg, self.cfg.noise_level)
            .map_err(|source| ReflectanceError::Denoiser { iteration, source })?;
        if r_next.dims() != r.dims() {
            return Err(ReflectanceError::Denoiser {
                iteration,
                source: DenoiseError::DimensionMismatch {
                    expected: r.dims(),
                    actual: r_next.dims(),
                },
            });
        }
        Ok((z, r_next))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceReport {
    pub iterations: usize,
    /// Last relative change `‖R⁽ᵏ⁺¹⁾ − R⁽ᵏ⁾‖ / ‖R⁽ᵏ⁾‖`.
    pub final_change: f64,
    pub converged: bool,
    pub trace: Vec<(usize, f64)>,
}

impl ReflectanceReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,relative_change\n");
        for (it, change) in &self.trace {
            let _ = writeln!(out, "{it},{change:e}");
        }
        out
    }
}

/// Result of a reflectance run.
#[derive(Debug, Clone)]
pub struct HqsRun {
    /// Final reflectance clamped to `[0, r_ceil]`.
    pub reflectance: ImageRgb,
    pub report: ReflectanceReport,
    /// Unclamped iterates `R⁽⁰⁾ … R⁽ᴷ⁾`, when recording was requested.
    pub snapshots: Vec<ImageRgb>,
}

pub fn run_hqs(ctx: &HqsContext<'_>, record: bool) -> Result<HqsRun, ReflectanceError> {
    let cfg = ctx.cfg;
    let mut state = HqsState {
        r: init_reflectance(ctx.s, ctx.l, cfg.l_floor),
        z: init_reflectance(ctx.s, ctx.l, cfg.l_floor),
        mu: cfg.mu,
        iter: 0,
    };
    let mut snapshots = Vec::new();
    if record {
        snapshots.push(state.r.clone());
    }
    let mut trace = Vec::new();
    let mut change = f64::INFINITY;
    let mut converged = false;

    while state.iter < cfg.max_iter_r {
        let (z, r_next) = ctx.step(&state.r, state.iter)?;
        let diff = r_next.zip_map(&state.r, |a, b| a - b).norm();
        change = diff / state.r.norm().max(1e-12);
        state = HqsState {
            r: r_next,
            z,
            mu: state.mu,
            iter: state.iter + 1,
        };
        if record {
            snapshots.push(state.r.clone());
        }
        trace.push((state.iter, change));
        if change <= cfg.r_tol {
            converged = true;
            break;
        }
    }

    Ok(HqsRun {
        reflectance: state.r.clamp(0.0, cfg.r_ceil),
        report: ReflectanceReport {
            iterations: state.iter,
            final_change: change,
            converged,
            trace,
        },
        snapshots,
    })
}

/// Runs the reflectance stage for a fixed illumination.
pub fn estimate_reflectance(
    s: &ImageRgb,
    l: &ImagePlane,
    denoiser: &dyn Denoiser,
    cfg: &EnhanceConfig,
) -> Result<(ImageRgb, ReflectanceReport), ReflectanceError> {
    let plan = FftSolverPlan::new(s.height(), s.width());
    let ctx = HqsContext::new(s, l, &plan, denoiser, cfg)?;
    let run = run_hqs(&ctx, false)?;
    Ok((run.reflectance, run.report))
}
