//! Periodic finite-difference operators and the edge-preserving gradient map.
//!
//! `gradient` is the forward difference with wrap-around; `divergence` is
//! defined so that `-divergence` is its exact adjoint. The transpose
//! `∇ᵀ` that appears in the solver updates is therefore `-divergence`.

mod solver;

pub use solver::{solve_screened_poisson, solve_screened_poisson_with_residue, FftSolverPlan};

use thiserror::Error;

use crate::raster::ImagePlane;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("gradient components differ in size: gx {gx:?}, gy {gy:?}")]
    DimensionMismatch {
        gx: (usize, usize),
        gy: (usize, usize),
    },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("kappa must be non-negative and finite, got {0}")]
    NegativeGain(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("identity weight must be positive for an invertible system, got {0}")]
    SingularSystem(f64),
    #[error("Laplacian weight must be non-negative and finite, got {0}")]
    InvalidWeight(f64),
    #[error("right-hand side is {actual:?}, plan is {plan:?}")]
    DimensionMismatch {
        plan: (usize, usize),
        actual: (usize, usize),
    },
}

/// Horizontal and vertical forward differences of a plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    gx: ImagePlane,
    gy: ImagePlane,
}

impl GradientField {
    pub fn new(gx: ImagePlane, gy: ImagePlane) -> Result<Self, GradError> {
        if gx.dims() != gy.dims() {
            return Err(GradError::DimensionMismatch {
                gx: gx.dims(),
                gy: gy.dims(),
            });
        }
        Ok(Self { gx, gy })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            gx: ImagePlane::zeros(height, width),
            gy: ImagePlane::zeros(height, width),
        }
    }

    pub fn gx(&self) -> &ImagePlane {
        &self.gx
    }

    pub fn gy(&self) -> &ImagePlane {
        &self.gy
    }

    pub fn dims(&self) -> (usize, usize) {
        self.gx.dims()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            gx: self.gx.map(&f),
            gy: self.gy.map(&f),
        }
    }

    pub fn zip_map(&self, other: &GradientField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            gx: self.gx.zip_map(&other.gx, &f),
            gy: self.gy.zip_map(&other.gy, &f),
        }
    }

    pub fn add(&self, other: &GradientField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GradientField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        self.gx.dot(&other.gx) + self.gy.dot(&other.gy)
    }

    /// Frobenius norm over both components.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Anisotropic ℓ₁ norm, `Σ |gx| + |gy|`.
    pub fn l1_norm(&self) -> f64 {
        self.gx.data().iter().map(|v| v.abs()).sum::<f64>()
            + self.gy.data().iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &GradientField) -> f64 {
        self.gx
            .max_abs_diff(&other.gx)
            .max(self.gy.max_abs_diff(&other.gy))
    }
}

/// Forward differences with periodic wrap.
pub fn gradient(p: &ImagePlane) -> GradientField {
    let (h, w) = p.dims();
    let d = p.data();
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h {
        let down = if r + 1 == h { 0 } else { r + 1 };
        for c in 0..w {
            let right = if c + 1 == w { 0 } else { c + 1 };
            let here = d[r * w + c];
            gx[r * w + c] = d[r * w + right] - here;
            gy[r * w + c] = d[down * w + c] - here;
        }
    }
    GradientField {
        gx: ImagePlane::from_raw(h, w, gx),
        gy: ImagePlane::from_raw(h, w, gy),
    }
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
pub fn divergence(g: &GradientField) -> ImagePlane {
    let (h, w) = g.dims();
    let gx = g.gx.data();
    let gy = g.gy.data();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let up = if r == 0 { h - 1 } else { r - 1 };
        for c in 0..w {
            let left = if c == 0 { w - 1 } else { c - 1 };
            let i = r * w + c;
            out[i] = gx[i] - gx[r * w + left] + gy[i] - gy[up * w + c];
        }
    }
    ImagePlane::from_raw(h, w, out)
}

/// `∇ᵀ g`, i.e. `-divergence(g)`.
pub fn gradient_transpose(g: &GradientField) -> ImagePlane {
    divergence(g).map(|v| -v)
}

/// Thresholded then amplified gradient map of `s_plane`.
///
/// `eps` and `sigma` are given in 8-bit code units and rescaled to the
/// `[0, 1]` working range. Components with `|g| < eps/255` are zeroed; every
/// other component becomes `(1 + kappa * exp(-|g| * 255 / sigma)) * g`.
pub fn adjusted_gradient(
    s_plane: &ImagePlane,
    eps: f64,
    kappa: f64,
    sigma: f64,
) -> Result<GradientField, GradError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(GradError::NonPositive {
            name: "eps",
            value: eps,
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GradError::NonPositive {
            name: "sigma",
            value: sigma,
        });
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(GradError::NegativeGain(kappa));
    }
    let threshold = eps / 255.0;
    let adjust = |g: f64| {
        if g.abs() < threshold {
            0.0
        } else {
            (1.0 + kappa * (-g.abs() * 255.0 / sigma).exp()) * g
        }
    };
    Ok(gradient(s_plane).map(adjust))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(h: usize, w: usize, rng: &mut ChaCha8Rng) -> ImagePlane {
        ImagePlane::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constant_plane_has_zero_gradient() {
        let g = gradient(&ImagePlane::filled(4, 5, 0.3));
        assert_eq!(g.l1_norm(), 0.0);
    }

    #[test]
    fn ramp_wraps_at_last_column() {
        let n = 6;
        let ramp = ImagePlane::from_fn(1, n, |_, c| c as f64);
        let g = gradient(&ramp);
        for c in 0..n - 1 {
            assert_eq!(g.gx().get(0, c), 1.0);
        }
        assert_eq!(g.gx().get(0, n - 1), -((n - 1) as f64));
        // single row: vertical neighbor is the pixel itself
        assert!(g.gy().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(h, w) in &[(1, 1), (3, 5), (8, 8), (17, 23)] {
            let a = random_plane(h, w, &mut rng);
            let g = GradientField::new(random_plane(h, w, &mut rng), random_plane(h, w, &mut rng))
                .unwrap();
            let lhs = gradient(&a).dot(&g);
            let rhs = a.dot(&gradient_transpose(&g));
            assert!((lhs - rhs).abs() < 1e-10, "{h}x{w}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn field_rejects_mismatch() {
        let err = GradientField::new(ImagePlane::zeros(2, 2), ImagePlane::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, GradError::DimensionMismatch { .. }));
    }

    #[test]
    fn adjusted_gradient_scalar_cases() {
        // single row [0, x]: gx(0,0) = x, gx(0,1) = -x
        let plane = |x: f64| ImagePlane::new(1, 2, vec![0.0, x]).unwrap();

        let g = adjusted_gradient(&plane(0.5 / 255.0), 1.0, 2.5, 10.0).unwrap();
        assert_eq!(g.gx().data(), &[0.0, 0.0]);

        let g = adjusted_gradient(&plane(10.0 / 255.0), 1.0, 2.5, 10.0).unwrap();
        let expected = (1.0 + 2.5 * (-1.0f64).exp()) * 10.0 / 255.0;
        assert!((g.gx().get(0, 0) - expected).abs() < 1e-15);
        assert!((expected * 255.0 - 19.197).abs() < 1e-3);
        // odd symmetry
        assert_eq!(g.gx().get(0, 1), -g.gx().get(0, 0));

        let g = adjusted_gradient(&ImagePlane::filled(3, 3, 0.4), 1.0, 2.5, 10.0).unwrap();
        assert_eq!(g.l1_norm(), 0.0);
    }

    #[test]
    fn adjusted_gradient_rejects_bad_parameters() {
        let p = ImagePlane::zeros(2, 2);
        assert!(adjusted_gradient(&p, 1.0, 2.5, 0.0).is_err());
        assert!(adjusted_gradient(&p, 0.0, 2.5, 10.0).is_err());
        assert!(adjusted_gradient(&p, 1.0, -1.0, 10.0).is_err());
    }
}
