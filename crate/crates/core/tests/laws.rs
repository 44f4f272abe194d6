use bessel_snake::rng::RngStream;
use bessel_snake::snake::{simulate_snake_watching, SnakeConfig, StopRule, Watch};
use bessel_snake::spine::{sample_minimizing_path, sample_spine_subtrees, SpineConfig};
use bessel_snake::stats::{ks_two_sample, mean_se, pearson_correlation};

#[test]
fn minimizer_position_is_reversal_symmetric() {
    // under s ↦ σ - s the snake has the same law, so s_m/σ and 1 - s_m/σ agree
    let mut cfg = SnakeConfig::new(0.01, 1e-4, 1e-2);
    cfg.refine_k = 0.0;
    let frac = |i: u64| {
        let mut rng = RngStream::new(101, i).rng();
        let t = simulate_snake_watching(0.0, &cfg, StopRule::Complete, &[], &mut rng).unwrap();
        let s = t.sgrid();
        (t.sm_time() - s[0]) / t.duration()
    };
    let fwd: Vec<f64> = (0..1500).map(frac).collect();
    let back: Vec<f64> = (1500..3000).map(|i| 1.0 - frac(i)).collect();
    let ks = ks_two_sample(&fwd, &back).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn reversed_trajectory_keeps_the_minimum() {
    let cfg = SnakeConfig::new(0.02, 1e-4, 1e-2);
    for i in 0..20 {
        let mut rng = RngStream::new(102, i).rng();
        let t = simulate_snake_watching(0.0, &cfg, StopRule::Complete, &[], &mut rng).unwrap();
        let r = t.time_reverse().unwrap();
        assert_eq!(r.wstar(), t.wstar());
        assert_eq!(r.sm_lifetime(), t.sm_lifetime());
        assert_eq!(r.len(), t.len());
    }
}

#[test]
fn conditional_tail_of_the_minimum() {
    // P(W_* ≤ -0.7 | W_* ≤ -0.5) = (0.5/0.7)²
    let cfg = SnakeConfig::new(0.01, 1e-4, 1e-2);
    let watch = [Watch::FirstPassage(-0.5)];
    let (mut below_a, mut below_b) = (0u32, 0u32);
    for i in 0..25_000 {
        let mut rng = RngStream::new(103, i).rng();
        let t = simulate_snake_watching(0.0, &cfg, StopRule::AtOrBelow(-0.7), &watch, &mut rng)
            .unwrap();
        if t.wstar() <= -0.5 {
            below_a += 1;
            if t.wstar() <= -0.7 {
                below_b += 1;
            }
        }
    }
    let p = below_b as f64 / below_a as f64;
    let target = (0.5f64 / 0.7).powi(2);
    let se = (target * (1.0 - target) / below_a as f64).sqrt();
    assert!(
        (p - target).abs() < 4.0 * se + 0.02,
        "p={p} target={target} n={below_a}"
    );
}

#[test]
fn spine_counts_on_disjoint_intervals_are_uncorrelated_poisson() {
    let mut rng = RngStream::new(104, 0).rng();
    let path = sample_minimizing_path(1.0, 1e-4, &mut rng).unwrap();
    let zeta = path.lifetime();
    let cfg = SpineConfig {
        trunc_eps: 0.05,
        resolve_depths: vec![],
        ..SpineConfig::default()
    };
    let n = 600;
    let mut counts = vec![vec![0.0; n]; 3];
    for i in 0..n {
        let mut rng = RngStream::new(104, 1 + i as u64).rng();
        let (hat, _) = sample_spine_subtrees(&path, 1.0, &cfg, &mut rng).unwrap();
        for r in hat {
            let k = ((3.0 * r.branch_level / zeta) as usize).min(2);
            counts[k][i] += 1.0;
        }
    }
    for k in 0..3 {
        let (m, _) = mean_se(&counts[k]);
        let var = counts[k].iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // dispersion index of a Poisson count is 1, with sd about sqrt(2/n)
        assert!(
            (var / m - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(),
            "interval {k}: mean {m} var {var}"
        );
        for j in k + 1..3 {
            let rho = pearson_correlation(&counts[k], &counts[j]).unwrap();
            assert!(
                rho.abs() < 4.0 / (n as f64).sqrt(),
                "intervals {k},{j}: rho {rho}"
            );
        }
    }
}
