use bessel_snake::path::FinitePath;
use bessel_snake::rng::RngStream;
use bessel_snake::sde::{
    girsanov_weight, simulate_bessel, simulate_brownian_to_level, BesselConfig, StopKind,
};
use bessel_snake::snake::{simulate_snake_with, SnakeConfig, StopRule};
use bessel_snake::superbm::{cdf_mx, sample_wmin, Atom, FiniteMeasure1D};
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = FiniteMeasure1D> {
    prop::collection::vec((-3.0f64..3.0, 0.05f64..3.0), 1..5).prop_map(|v| {
        FiniteMeasure1D::new(v.into_iter().map(|(u, mass)| Atom { u, mass }).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn same_stream_same_bessel_path(seed in any::<u64>(), stream in 0u64..1000, alpha in 0.6f64..4.0) {
        let cfg = BesselConfig::new(alpha, 1.0).with_dt(1e-3);
        let a = simulate_bessel(&cfg, &mut RngStream::new(seed, stream).rng()).unwrap();
        let b = simulate_bessel(&cfg, &mut RngStream::new(seed, stream).rng()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn girsanov_weight_is_bounded(seed in any::<u64>(), alpha in 0.6f64..4.0, delta in 0.1f64..0.9) {
        let mut rng = RngStream::new(seed, 0).rng();
        let p = simulate_brownian_to_level(1.0, delta, 1e-3, 1e3, &mut rng).unwrap();
        if p.stop == StopKind::LevelHit {
            let w = girsanov_weight(&p, alpha, 1.0, delta).unwrap();
            prop_assert!(w > 0.0);
            prop_assert!(w <= (1.0 / delta).powf(alpha) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn min_cdf_multiplies_over_independent_measures(mu in measure(), nu in measure(), gap in 0.01f64..5.0) {
        let x = mu.min_location().min(nu.min_location()) - gap;
        let joint = cdf_mx(&mu.plus(&nu), x).unwrap();
        let product = cdf_mx(&mu, x).unwrap() * cdf_mx(&nu, x).unwrap();
        prop_assert!((joint - product).abs() <= 1e-12 * product.max(1e-300) + 1e-300);
    }

    #[test]
    fn min_cdf_is_translation_equivariant(mu in measure(), gap in 0.01f64..5.0, c in -10.0f64..10.0) {
        let x = mu.min_location() - gap;
        let a = cdf_mx(&mu, x).unwrap();
        let b = cdf_mx(&mu.shifted(c), x + c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
    }

    #[test]
    fn minimizing_path_shifts_with_the_measure(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mu = FiniteMeasure1D::new(vec![Atom { u: 0.5, mass: 1.0 }, Atom { u: 1.5, mass: 0.5 }]).unwrap();
        let a = sample_wmin(&mu, 1e-3, &mut RngStream::new(seed, 1).rng()).unwrap();
        let b = sample_wmin(&mu.shifted(c), 1e-3, &mut RngStream::new(seed, 1).rng()).unwrap();
        prop_assert!((b.m_x - a.m_x - c).abs() < 1e-6);
        prop_assert_eq!(b.w0.map(|w| w - c).map(|w| (w * 1e6).round()), a.w0.map(|w| (w * 1e6).round()));
        prop_assert!((b.duration() - a.duration()).abs() < 1e-3);
    }

    #[test]
    fn value_at_interpolates_between_grid_points(vals in prop::collection::vec(-5.0f64..5.0, 2..20), c in -2.0f64..2.0) {
        let grid: Vec<f64> = (0..vals.len()).map(|k| k as f64 * 0.5).collect();
        let p = FinitePath::new(grid.clone(), vals.clone()).unwrap();
        for (t, v) in grid.iter().zip(&vals) {
            prop_assert!((p.value_at(*t) - v).abs() < 1e-12);
        }
        let q = p.shifted(c);
        prop_assert!((q.min_value() - p.min_value() - c).abs() < 1e-12);
        prop_assert!((q.endpoint() - p.endpoint() - c).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn same_stream_same_snake(seed in any::<u64>()) {
        let cfg = SnakeConfig::new(0.01, 1e-4, 1e-2);
        let run = || simulate_snake_with(0.0, &cfg, StopRule::AtOrBelow(-0.3), &mut RngStream::new(seed, 3).rng()).unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(a.wstar(), b.wstar());
        prop_assert_eq!(a.sm_index(), b.sm_index());
        prop_assert_eq!(a.tips(), b.tips());
    }
}
