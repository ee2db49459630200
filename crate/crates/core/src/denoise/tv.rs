//! Total-variation denoising by dual projection.
//!
//! Minimizes `½‖x − f‖² + weight · TV(x)` with isotropic TV and Neumann
//! boundaries, iterating the fixed-point projection on the dual field `p`:
//! `p ← (p + τ∇(div p − f/weight)) / (1 + τ|∇(div p − f/weight)|)`, then
//! `x = f − weight · div p`.

use crate::raster::ImagePlane;

const TAU: f64 = 0.25;

fn forward_diff(u: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; h * w];
    let mut dy = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                dx[i] = u[i + 1] - u[i];
            }
            if r + 1 < h {
                dy[i] = u[i + w] - u[i];
            }
        }
    }
    (dx, dy)
}

// Negative adjoint of `forward_diff`.
fn backward_div(px: &[f64], py: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let x = if w == 1 {
                0.0
            } else if c == 0 {
                px[i]
            } else if c + 1 == w {
                -px[i - 1]
            } else {
                px[i] - px[i - 1]
            };
            let y = if h == 1 {
                0.0
            } else if r == 0 {
                py[i]
            } else if r + 1 == h {
                -py[i - w]
            } else {
                py[i] - py[i - w]
            };
            out[i] = x + y;
        }
    }
    out
}

/// Isotropic total variation with Neumann boundaries.
pub fn total_variation(plane: &ImagePlane) -> f64 {
    let (h, w) = plane.dims();
    let (dx, dy) = forward_diff(plane.data(), h, w);
    dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).sum()
}

pub fn tv_denoise(plane: &ImagePlane, weight: f64, iters: usize) -> ImagePlane {
    if weight <= 0.0 || iters == 0 {
        return plane.clone();
    }
    let (h, w) = plane.dims();
    let f = plane.data();
    let n = h * w;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let inv_weight = 1.0 / weight;
    let mut arg = vec![0.0; n];
    for _ in 0..iters {
        let div = backward_div(&px, &py, h, w);
        for i in 0..n {
            arg[i] = div[i] - f[i] * inv_weight;
        }
        let (gx, gy) = forward_diff(&arg, h, w);
        for i in 0..n {
            let denom = 1.0 + TAU * gx[i].hypot(gy[i]);
            px[i] = (px[i] + TAU * gx[i]) / denom;
            py[i] = (py[i] + TAU * gy[i]) / denom;
        }
    }
    let div = backward_div(&px, &py, h, w);
    ImagePlane::from_raw(
        h,
        w,
        f.iter()
            .zip(&div)
            .map(|(fi, di)| fi - weight * di)
            .collect(),
    )
}
