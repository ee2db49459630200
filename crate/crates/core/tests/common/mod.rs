//! Dense-matrix oracles and seeded fixtures shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pnp_retinex::grad::GradientField;
use pnp_retinex::{ImagePlane, ImageRgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Periodic forward-difference gradient as a `2n × n` matrix, x rows first.
pub fn dense_gradient(h: usize, w: usize) -> DMatrix<f64> {
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

/// Solves `(a·I + b·DᵀD) x = rhs` by LU on the assembled matrix.
pub fn dense_screened_poisson(a: f64, b: f64, rhs: &ImagePlane) -> ImagePlane {
    let (h, w) = rhs.dims();
    let n = h * w;
    let d = dense_gradient(h, w);
    let m = DMatrix::identity(n, n) * a + d.transpose() * &d * b;
    let x = m
        .lu()
        .solve(&DVector::from_column_slice(rhs.data()))
        .expect("screened Poisson matrix is nonsingular");
    ImagePlane::new(h, w, x.as_slice().to_vec()).unwrap()
}

/// `Dᵀ g` computed densely.
pub fn dense_gradient_transpose(g: &GradientField) -> ImagePlane {
    let (h, w) = g.dims();
    let stacked = DVector::from_iterator(
        2 * h * w,
        g.gx().data().iter().chain(g.gy().data()).copied(),
    );
    let out = dense_gradient(h, w).transpose() * stacked;
    ImagePlane::new(h, w, out.as_slice().to_vec()).unwrap()
}

pub fn random_plane(h: usize, w: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> ImagePlane {
    ImagePlane::from_fn(h, w, |_, _| rng.random_range(lo..hi))
}

pub fn random_rgb(h: usize, w: usize, lo: f64, hi: f64, seed: u64) -> ImageRgb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageRgb::from_fn(h, w, |_, _| [0; 3].map(|_| rng.random_range(lo..hi)))
}

/// Smooth plane in `[0, 1]`: a few low-frequency sinusoids.
pub fn smooth_plane(h: usize, w: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.1..0.25),
            )
        })
        .collect();
    ImagePlane::from_fn(h, w, |r, c| {
        let (y, x) = (r as f64 / h as f64, c as f64 / w as f64);
        let v: f64 = waves
            .iter()
            .map(|&(fy, fx, ph, amp)| amp * (std::f64::consts::TAU * (fy * y + fx * x) + ph).sin())
            .sum();
        (0.5 + v).clamp(0.0, 1.0)
    })
}

/// Bitwise equality of two images.
pub fn bit_identical(a: &ImageRgb, b: &ImageRgb) -> bool {
    a.dims() == b.dims()
        && a.channels().iter().zip(b.channels()).all(|(p, q)| {
            p.data()
                .iter()
                .zip(q.data())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        })
}
