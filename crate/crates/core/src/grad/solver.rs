use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SolverError;
use crate::raster::ImagePlane;

/// Precomputed FFTs and Laplacian eigenvalues for one raster size.
///
/// Under periodic boundaries `∇ᵀ∇` is diagonal in the DFT basis with
/// eigenvalue `(2 - 2cos(2πk/W)) + (2 - 2cos(2πl/H))` at frequency `(l, k)`.
#[derive(Clone)]
pub struct FftSolverPlan {
    height: usize,
    width: usize,
    laplacian_spectrum: Vec<f64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftSolverPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftSolverPlan")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl FftSolverPlan {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "plan dimensions must be non-zero");
        let mut planner = FftPlanner::new();
        let eig = |k: usize, n: usize| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos();
        let mut laplacian_spectrum = Vec::with_capacity(height * width);
        for l in 0..height {
            for k in 0..width {
                // cos can round to slightly above 1 only at k = 0, where the
                // eigenvalue is exactly zero anyway
                laplacian_spectrum.push((eig(k, width) + eig(l, height)).max(0.0));
            }
        }
        Self {
            height,
            width,
            laplacian_spectrum,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn for_plane(plane: &ImagePlane) -> Self {
        Self::new(plane.height(), plane.width())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn laplacian_spectrum(&self) -> &[f64] {
        &self.laplacian_spectrum
    }

    fn transform(&self, buf: &mut [Complex64], scratch: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        for r in 0..h {
            for c in 0..w {
                scratch[c * h + r] = buf[r * w + c];
            }
        }
        col.process(scratch);
        for c in 0..w {
            for r in 0..h {
                buf[r * w + c] = scratch[c * h + r];
            }
        }
    }
}

/// Solves `(a·I + b·∇ᵀ∇) x = rhs` under periodic boundaries.
pub fn solve_screened_poisson(
    plan: &FftSolverPlan,
    a: f64,
    b: f64,
    rhs: &ImagePlane,
) -> Result<ImagePlane, SolverError> {
    solve_screened_poisson_with_residue(plan, a, b, rhs).map(|(x, _)| x)
}

/// Like [`solve_screened_poisson`], also returning the largest imaginary
/// magnitude left after the inverse transform (discarded from the result).
pub fn solve_screened_poisson_with_residue(
    plan: &FftSolverPlan,
    a: f64,
    b: f64,
    rhs: &ImagePlane,
) -> Result<(ImagePlane, f64), SolverError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(SolverError::SingularSystem(a));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(SolverError::InvalidWeight(b));
    }
    if rhs.dims() != plan.dims() {
        return Err(SolverError::DimensionMismatch {
            plan: plan.dims(),
            actual: rhs.dims(),
        });
    }
    if b == 0.0 {
        return Ok((rhs.map(|v| v / a), 0.0));
    }

    let n = rhs.len();
    let mut buf: Vec<Complex64> = rhs.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    plan.transform(&mut buf, &mut scratch, false);
    for (z, &lap) in buf.iter_mut().zip(&plan.laplacian_spectrum) {
        *z /= a + b * lap;
    }
    plan.transform(&mut buf, &mut scratch, true);

    let norm = 1.0 / n as f64;
    let mut residue = 0.0f64;
    let data = buf
        .iter()
        .map(|z| {
            residue = residue.max((z.im * norm).abs());
            z.re * norm
        })
        .collect();
    Ok((ImagePlane::from_raw(plan.height, plan.width, data), residue))
}
