//! Randomized invariants over the numerical kernels.

use proptest::prelude::*;

use kcq::estimators::{conditional_moments, default_grid, trapezoid, weighted_kde};
use kcq::sampling::{
    compute_voronoi_weights, generate_halton, neumaier_sum, quadrature, transform_to_distribution,
    Marginal, ParameterSpace,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halton_points_lie_in_the_open_unit_cube(
        n in 1usize..200,
        dim in 1usize..4,
        seed in 0u64..1000,
    ) {
        let pts = generate_halton(n, dim, seed).unwrap();
        for v in pts.iter() {
            prop_assert!(*v > 0.0 && *v < 1.0);
        }
        // Deterministic per seed.
        prop_assert_eq!(pts, generate_halton(n, dim, seed).unwrap());
    }

    #[test]
    fn voronoi_weights_are_a_probability_vector(
        n in 4usize..48,
        seed in 0u64..100,
    ) {
        let space = ParameterSpace::new(vec![
            Marginal::StandardNormal,
            Marginal::Normal { mean: 1.0, sd: 0.5 },
        ]);
        let unit = generate_halton(n, 2, seed).unwrap();
        let pts = transform_to_distribution(&unit, &space).unwrap();
        let w = compute_voronoi_weights(&pts, &space, 3000, seed + 1).unwrap();
        prop_assert_eq!(w.len(), n);
        for wi in &w {
            prop_assert!(*wi >= 0.0);
        }
        let total = neumaier_sum(w.iter().copied());
        prop_assert!((total - 1.0).abs() <= 1e-12, "sum {}", total);
    }

    #[test]
    fn quadrature_is_linear(
        values in prop::collection::vec(-1e3f64..1e3, 8),
        others in prop::collection::vec(-1e3f64..1e3, 8),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let w = vec![1.0 / 8.0; 8];
        let combo: Vec<f64> = values
            .iter()
            .zip(&others)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let lhs = quadrature(&combo, &w).unwrap();
        let rhs = a * quadrature(&values, &w).unwrap() + b * quadrature(&others, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conditional_moments_ignore_prior_weight_scale(
        raw in prop::collection::vec(0.01f64..1.0, 16),
        loglik in prop::collection::vec(-3.0f64..0.0, 16),
        values in prop::collection::vec(-10.0f64..10.0, 16),
        scale in 0.1f64..100.0,
    ) {
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let scaled: Vec<f64> = w.iter().map(|x| scale * x).collect();
        let a = conditional_moments(&w, &loglik, &values, 2.0).unwrap();
        let b = conditional_moments(&scaled, &loglik, &values, 2.0).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
        prop_assert!((a.variance - b.variance).abs() <= 1e-12 * (1.0 + a.variance));
    }

    #[test]
    fn conditional_moments_ignore_a_constant_loglik_shift(
        loglik in prop::collection::vec(-3.0f64..0.0, 16),
        values in prop::collection::vec(-10.0f64..10.0, 16),
        shift in -50.0f64..50.0,
    ) {
        let w = vec![1.0 / 16.0; 16];
        let shifted: Vec<f64> = loglik.iter().map(|l| l + shift).collect();
        let a = conditional_moments(&w, &loglik, &values, 2.0).unwrap();
        let b = conditional_moments(&w, &shifted, &values, 2.0).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-10 * (1.0 + a.mean.abs()));
        prop_assert!((a.variance - b.variance).abs() <= 1e-10 * (1.0 + a.variance));
    }

    #[test]
    fn kde_is_nonnegative_and_normalized_on_a_wide_grid(
        centers in prop::collection::vec(-2.0f64..2.0, 12),
        sigma in 0.05f64..0.5,
    ) {
        let w = vec![1.0 / 12.0; 12];
        let grid = default_grid(0.0, 3.0, 600);
        let pdf = weighted_kde(&grid, &centers, &w, sigma).unwrap();
        for p in &pdf {
            prop_assert!(*p >= 0.0);
        }
        let mass = trapezoid(&grid, &pdf);
        prop_assert!((mass - 1.0).abs() <= 1e-2, "mass {}", mass);
    }

    #[test]
    fn default_grid_is_strictly_increasing_and_centered(
        mean in -1e3f64..1e3,
        sd in 1e-6f64..1e3,
        points in 2usize..500,
    ) {
        // The grid enforces a minimum resolution regardless of the request.
        let grid = default_grid(mean, sd, points);
        prop_assert_eq!(grid.len(), points.max(400));
        for pair in grid.windows(2) {
            prop_assert!(pair[1] > pair[0]);
        }
        prop_assert!(grid[0] < mean && mean < grid[grid.len() - 1]);
    }

    #[test]
    fn marginal_cdf_inverse_round_trip(
        p in 0.001f64..0.999,
        mean in -10.0f64..10.0,
        sd in 0.1f64..10.0,
    ) {
        let m = Marginal::Normal { mean, sd };
        let x = m.inverse_cdf(p);
        prop_assert!((m.cdf(x) - p).abs() <= 1e-9);
    }
}
