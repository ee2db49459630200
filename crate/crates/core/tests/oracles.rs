//! Solver stages checked against dense linear-algebra oracles.

mod common;

use pnp_retinex::grad::{
    gradient, gradient_transpose, solve_screened_poisson, FftSolverPlan, GradientField,
};
use pnp_retinex::illumination::{admm_update_l, AdmmState};
use pnp_retinex::reflectance::{channel_gradient_maps, hqs_update_z};
use pnp_retinex::ImagePlane;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn l_update_matches_dense_solve() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l_hat = common::random_plane(4, 4, 0.0, 1.0, &mut rng);
        let v = GradientField::new(
            common::random_plane(4, 4, -0.2, 0.2, &mut rng),
            common::random_plane(4, 4, -0.2, 0.2, &mut rng),
        )
        .unwrap();
        let z = GradientField::new(
            common::random_plane(4, 4, -0.1, 0.1, &mut rng),
            common::random_plane(4, 4, -0.1, 0.1, &mut rng),
        )
        .unwrap();
        let theta = 0.0045 * 1.08f64.powi(seed as i32 * 7);
        let state = AdmmState {
            l: l_hat.clone(),
            v: v.clone(),
            z: z.clone(),
            theta,
            iter: 0,
        };
        let fast = admm_update_l(&state, &l_hat, &FftSolverPlan::new(4, 4)).unwrap();
        let rhs = l_hat
            .scale(2.0)
            .add(&common::dense_gradient_transpose(&v).scale(theta))
            .sub(&common::dense_gradient_transpose(&z));
        let dense = common::dense_screened_poisson(2.0, theta, &rhs);
        assert!(fast.max_abs_diff(&dense) < 1e-8);
    }
}

#[test]
fn z_update_matches_dense_solve() {
    for seed in 0..10 {
        let r = common::random_rgb(4, 4, 0.0, 2.0, seed);
        let s = common::random_rgb(4, 4, 0.0, 1.0, seed + 100);
        let g = channel_gradient_maps(&s, 1.0, 2.5, 10.0).unwrap();
        let (beta, mu) = (0.001, 0.001);
        let z = hqs_update_z(&r, &g, beta, mu, &FftSolverPlan::new(4, 4)).unwrap();
        for (k, gk) in g.iter().enumerate() {
            let rhs = common::dense_gradient_transpose(gk)
                .scale(2.0 * beta)
                .add(&r.channel(k).scale(mu));
            let dense = common::dense_screened_poisson(mu, 2.0 * beta, &rhs);
            assert!(z.channel(k).max_abs_diff(&dense) < 1e-8);
        }
    }
}

#[test]
fn gradient_transpose_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (h, w) in [(1, 1), (1, 7), (5, 1), (6, 9)] {
        let g = GradientField::new(
            common::random_plane(h, w, -1.0, 1.0, &mut rng),
            common::random_plane(h, w, -1.0, 1.0, &mut rng),
        )
        .unwrap();
        assert!(gradient_transpose(&g).max_abs_diff(&common::dense_gradient_transpose(&g)) < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_inverts_operator(
        h in 1usize..12,
        w in 1usize..12,
        a in 0.001f64..5.0,
        b in 0.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = common::random_plane(h, w, -1.0, 1.0, &mut rng);
        let rhs = x.scale(a).add(&gradient_transpose(&gradient(&x)).scale(b));
        let solved = solve_screened_poisson(&FftSolverPlan::new(h, w), a, b, &rhs).unwrap();
        prop_assert!(solved.max_abs_diff(&x) < 1e-8 * (1.0 + b / a));
    }

    #[test]
    fn gradient_adjoint(h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: ImagePlane = common::random_plane(h, w, -1.0, 1.0, &mut rng);
        let g = GradientField::new(
            common::random_plane(h, w, -1.0, 1.0, &mut rng),
            common::random_plane(h, w, -1.0, 1.0, &mut rng),
        ).unwrap();
        let lhs = gradient(&x).dot(&g);
        let rhs = x.dot(&gradient_transpose(&g));
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
