//! Illumination estimation: an initial estimate `L̂` from the RGB channels,
//! refined by ADMM on `min_L ‖L − L̂‖² + α‖∇L‖₁`.
//!
//! The splitting introduces `v = ∇L` with multiplier `Z` and a penalty `θ`
//! that grows geometrically. Each iteration:
//!
//! ```text
//! L ← (2 + θ∇ᵀ∇)⁻¹ (2L̂ + θ∇ᵀv − ∇ᵀZ)
//! v ← η(∇L + Z/θ, α/θ)
//! Z ← Z + θ(∇L − v)
//! θ ← ρθ
//! ```
//!
//! until `‖∇L − v‖_F ≤ ι‖L̂‖_F`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{EnhanceConfig, IlluminationInit};
use crate::grad::{
    gradient, gradient_transpose, solve_screened_poisson, FftSolverPlan, GradientField, SolverError,
};
use crate::raster::{ImagePlane, ImageRgb};
use crate::shrink::soft_shrink;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IlluminationError {
    #[error("penalty growth factor must exceed 1, got {0}")]
    InvalidGrowth(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Per-pixel mean over R, G, B.
pub fn mean_rgb(s: &ImageRgb) -> ImagePlane {
    let [r, g, b] = s.channels();
    let rg = r.add(g);
    rg.zip_map(b, |x, y| (x + y) / 3.0)
}

/// Per-pixel max over R, G, B.
pub fn max_rgb(s: &ImageRgb) -> ImagePlane {
    let [r, g, b] = s.channels();
    r.zip_map(g, f64::max).zip_map(b, f64::max)
}

pub fn initial_illumination(s: &ImageRgb, init: IlluminationInit) -> ImagePlane {
    match init {
        IlluminationInit::MeanRgb => mean_rgb(s),
        IlluminationInit::MaxRgb => max_rgb(s),
    }
}

/// `‖L − L̂‖² + α‖∇L‖₁` with the anisotropic ℓ₁ norm.
pub fn illumination_objective(l: &ImagePlane, l_hat: &ImagePlane, alpha: f64) -> f64 {
    let d = l.sub(l_hat);
    d.dot(&d) + alpha * gradient(l).l1_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub l: ImagePlane,
    pub v: GradientField,
    /// Lagrange multiplier.
    pub z: GradientField,
    pub theta: f64,
    pub iter: usize,
}

impl AdmmState {
    /// `L = L̂`, `v = ∇L̂`, `Z = 0`.
    pub fn new(l_hat: &ImagePlane, theta0: f64) -> Self {
        let (h, w) = l_hat.dims();
        Self {
            l: l_hat.clone(),
            v: gradient(l_hat),
            z: GradientField::zeros(h, w),
            theta: theta0,
            iter: 0,
        }
    }
}

pub fn admm_update_l(
    state: &AdmmState,
    l_hat: &ImagePlane,
    plan: &FftSolverPlan,
) -> Result<ImagePlane, SolverError> {
    let rhs = l_hat
        .scale(2.0)
        .add(&gradient_transpose(&state.v).scale(state.theta))
        .sub(&gradient_transpose(&state.z));
    solve_screened_poisson(plan, 2.0, state.theta, &rhs)
}

pub fn admm_update_v(l: &ImagePlane, z: &GradientField, theta: f64, alpha: f64) -> GradientField {
    let threshold = alpha / theta;
    gradient(l).zip_map(z, |g, zz| soft_shrink(g + zz / theta, threshold))
}

/// `Z += θ(∇L − v)`, `θ *= ρ`, `iter += 1`, installing the new `L` and `v`.
pub fn admm_update_multipliers(
    state: AdmmState,
    l_new: ImagePlane,
    v_new: GradientField,
    rho: f64,
) -> Result<AdmmState, IlluminationError> {
    // Also rejects NaN.
    if rho.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(IlluminationError::InvalidGrowth(rho));
    }
    let gap = gradient(&l_new).sub(&v_new);
    Ok(AdmmState {
        z: state.z.add(&gap.scale(state.theta)),
        theta: state.theta * rho,
        iter: state.iter + 1,
        l: l_new,
        v: v_new,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmTraceRow {
    pub iteration: usize,
    pub residual: f64,
    /// Penalty used during this iteration.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmReport {
    pub iterations: usize,
    /// Final `‖∇L − v‖_F`.
    pub residual: f64,
    /// The stopping threshold `ι‖L̂‖_F`.
    pub tolerance: f64,
    pub converged: bool,
    pub trace: Vec<AdmmTraceRow>,
}

impl AdmmReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,residual,theta\n");
        for row in &self.trace {
            let _ = writeln!(out, "{},{:e},{:e}", row.iteration, row.residual, row.theta);
        }
        out
    }
}

/// Runs the full illumination stage and returns `L` clamped to
/// `[l_floor, 1]`.
pub fn estimate_illumination(s: &ImageRgb, cfg: &EnhanceConfig) -> (ImagePlane, AdmmReport) {
    let plan = FftSolverPlan::new(s.height(), s.width());
    estimate_illumination_with_plan(s, cfg, &plan)
}

pub fn estimate_illumination_with_plan(
    s: &ImageRgb,
    cfg: &EnhanceConfig,
    plan: &FftSolverPlan,
) -> (ImagePlane, AdmmReport) {
    let l_hat = initial_illumination(s, cfg.init);
    let (l, report) = refine_illumination(&l_hat, cfg, plan);
    (l.clamp(cfg.l_floor, 1.0), report)
}

/// The ADMM loop proper, without the final clamp.
///
/// Panics if `cfg.theta0 <= 0` or `cfg.rho <= 1`; validate the config first.
pub fn refine_illumination(
    l_hat: &ImagePlane,
    cfg: &EnhanceConfig,
    plan: &FftSolverPlan,
) -> (ImagePlane, AdmmReport) {
    assert!(cfg.theta0 > 0.0, "theta0 must be positive");
    let tolerance = cfg.iota * l_hat.norm();
    let mut state = AdmmState::new(l_hat, cfg.theta0);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;

    while state.iter < cfg.max_iter_l {
        let theta = state.theta;
        let l_new =
            admm_update_l(&state, l_hat, plan).expect("identity weight 2 is always invertible");
        let v_new = admm_update_v(&l_new, &state.z, theta, cfg.alpha);
        residual = gradient(&l_new).sub(&v_new).norm();
        state = admm_update_multipliers(state, l_new, v_new, cfg.rho).expect("rho must exceed 1");
        trace.push(AdmmTraceRow {
            iteration: state.iter,
            residual,
            theta,
        });
        if residual <= tolerance {
            converged = true;
            break;
        }
    }

    let report = AdmmReport {
        iterations: state.iter,
        residual,
        tolerance,
        converged,
        trace,
    };
    (state.l, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense periodic gradient operator (2n × n), rows gx then gy.
    fn dense_gradient(h: usize, w: usize) -> DMatrix<f64> {
        let n = h * w;
        let mut d = DMatrix::zeros(2 * n, n);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                d[(i, r * w + (c + 1) % w)] += 1.0;
                d[(i, i)] -= 1.0;
                d[(n + i, ((r + 1) % h) * w + c)] += 1.0;
                d[(n + i, i)] -= 1.0;
            }
        }
        d
    }

    fn stack(g: &GradientField) -> DVector<f64> {
        DVector::from_iterator(
            2 * g.gx().len(),
            g.gx().data().iter().chain(g.gy().data()).copied(),
        )
    }

    fn random_field(h: usize, w: usize, rng: &mut ChaCha8Rng) -> GradientField {
        GradientField::new(
            ImagePlane::from_fn(h, w, |_, _| rng.random_range(-0.5..0.5)),
            ImagePlane::from_fn(h, w, |_, _| rng.random_range(-0.5..0.5)),
        )
        .unwrap()
    }

    #[test]
    fn mean_and_max_rgb() {
        let img = ImageRgb::filled(2, 2, [0.3, 0.6, 0.9]);
        assert!(mean_rgb(&img).max_abs_diff(&ImagePlane::filled(2, 2, 0.6)) < 1e-15);
        assert_eq!(max_rgb(&img), ImagePlane::filled(2, 2, 0.9));
        let red = ImageRgb::filled(1, 1, [1.0, 0.0, 0.0]);
        assert_eq!(mean_rgb(&red).get(0, 0), 1.0 / 3.0);
        assert_eq!(
            mean_rgb(&ImageRgb::filled(3, 3, [0.0; 3])),
            ImagePlane::zeros(3, 3)
        );
    }

    #[test]
    fn l_update_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l_hat = ImagePlane::from_fn(6, 5, |_, _| rng.random::<f64>());
        let plan = FftSolverPlan::for_plane(&l_hat);
        for theta in [1e-6, 0.0045, 3.0] {
            let state = AdmmState::new(&l_hat, theta);
            let l = admm_update_l(&state, &l_hat, &plan).unwrap();
            assert!(l.max_abs_diff(&l_hat) < 1e-12);
        }
    }

    #[test]
    fn l_update_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (h, w) = (4, 4);
        let n = h * w;
        let l_hat = ImagePlane::from_fn(h, w, |_, _| rng.random::<f64>());
        let state = AdmmState {
            l: l_hat.clone(),
            v: random_field(h, w, &mut rng),
            z: random_field(h, w, &mut rng),
            theta: 0.37,
            iter: 0,
        };
        let plan = FftSolverPlan::new(h, w);
        let got = admm_update_l(&state, &l_hat, &plan).unwrap();

        let d = dense_gradient(h, w);
        let dt = d.transpose();
        let a = DMatrix::identity(n, n) * 2.0 + &dt * &d * state.theta;
        let rhs = DVector::from_column_slice(l_hat.data()) * 2.0
            + &dt * stack(&state.v) * state.theta
            - &dt * stack(&state.z);
        let want = a.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((got.data()[i] - want[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn v_update_is_shrinkage() {
        let l = ImagePlane::new(1, 2, vec![0.0, 0.5]).unwrap();
        let z = GradientField::zeros(1, 2);
        // gx = [0.5, -0.5], threshold alpha/theta = 0.2
        let v = admm_update_v(&l, &z, 1.0, 0.2);
        assert!((v.gx().get(0, 0) - 0.3).abs() < 1e-15);
        assert!((v.gx().get(0, 1) + 0.3).abs() < 1e-15);
        let v0 = admm_update_v(&l, &z, 1.0, 0.0);
        assert_eq!(v0, gradient(&l));
    }

    #[test]
    fn multiplier_update() {
        let l = ImagePlane::from_fn(3, 3, |r, c| (r * 3 + c) as f64);
        let state = AdmmState::new(&l, 0.0045);
        let v = gradient(&l);
        let next = admm_update_multipliers(state.clone(), l.clone(), v.clone(), 1.08).unwrap();
        assert_eq!(next.z, state.z);
        assert!((next.theta - 0.00486).abs() < 1e-15);
        assert_eq!(next.iter, 1);

        let mut s1 = AdmmState::new(&ImagePlane::zeros(2, 2), 1.0);
        s1.v = GradientField::zeros(2, 2).map(|_| -1.0);
        let l0 = ImagePlane::zeros(2, 2);
        let v_new = s1.v.clone();
        let next = admm_update_multipliers(s1, l0, v_new, 2.0).unwrap();
        assert_eq!(next.z, GradientField::zeros(2, 2).map(|_| 1.0));

        let s = AdmmState::new(&l, 1.0);
        assert_eq!(
            admm_update_multipliers(s, l.clone(), v, 1.0),
            Err(IlluminationError::InvalidGrowth(1.0))
        );
    }

    #[test]
    fn alpha_zero_returns_initializer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = ImageRgb::from_fn(8, 8, |_, _| [rng.random(), rng.random(), rng.random()]);
        let cfg = EnhanceConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let (l, report) = estimate_illumination(&img, &cfg);
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert!(l.max_abs_diff(&mean_rgb(&img).clamp(cfg.l_floor, 1.0)) < 1e-12);
    }

    #[test]
    fn constant_input_converges_immediately() {
        let img = ImageRgb::filled(5, 7, [0.2, 0.4, 0.9]);
        let (l, report) = estimate_illumination(&img, &EnhanceConfig::default());
        assert_eq!(report.iterations, 1);
        assert!(report.residual < 1e-12);
        assert!(l.max_abs_diff(&ImagePlane::filled(5, 7, 0.5)) < 1e-12);
    }

    #[test]
    fn objective_does_not_worsen_on_noisy_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let img = ImageRgb::from_fn(16, 16, |_, c| {
            let base = c as f64 / 16.0;
            [0; 3].map(|_| (base + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0))
        });
        let cfg = EnhanceConfig::default();
        let plan = FftSolverPlan::new(16, 16);
        let l_hat = mean_rgb(&img);
        let (l, _) = refine_illumination(&l_hat, &cfg, &plan);
        assert!(
            illumination_objective(&l, &l_hat, cfg.alpha)
                <= illumination_objective(&l_hat, &l_hat, cfg.alpha)
        );
    }

    #[test]
    fn theta_follows_geometric_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = ImageRgb::from_fn(12, 12, |_, _| [rng.random(), rng.random(), rng.random()]);
        let cfg = EnhanceConfig {
            max_iter_l: 20,
            iota: 1e-30,
            ..Default::default()
        };
        let (_, report) = estimate_illumination(&img, &cfg);
        assert_eq!(report.iterations, 20);
        assert!(!report.converged);
        let mut theta = cfg.theta0;
        for row in &report.trace {
            assert_eq!(row.theta, theta);
            theta *= cfg.rho;
        }
        assert!(report
            .trace_csv()
            .starts_with("iteration,residual,theta\n1,"));
    }
}
