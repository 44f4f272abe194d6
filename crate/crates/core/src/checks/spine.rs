use crate::error::Result;
use crate::rng::RngStream;
use crate::sde::bessel_absorption_cdf;
use crate::snake::{DeepBand, Side};
use crate::spine::{
    deep_subtree_intensity, sample_minimizing_path, sample_spine, sample_spine_subtrees,
    sample_wstar_conditioned, SpineConfig,
};
use crate::stats::{chi_square_independence, chi_square_poisson, pearson_correlation};

use super::snake::{
    conditioned_snakes, snake_config, ConditionedSnake, DEEP_BAND_REFINE_K, DEEP_BAND_WATCH,
    MINIMIZER_EPS,
};
use super::{purpose, replicate, CheckOutput, Column, RunConfig, Verdict};

const A0: f64 = 0.5;
/// Conditioned snakes used for the snake side of spine-poisson.
const SNAKE_N: u64 = 250;

/// `P(-W_* ≤ y, ζ_{s_m} ≤ t | -W_* ≥ a0) = ∫_{(a0/y)²}^1 G(t·u/a0²) du` with
/// `G` the absorption cdf of `R^(3)` from 1.
pub(super) fn integral_form_cdf(a0: f64, y: f64, t: f64) -> f64 {
    if y <= a0 || t <= 0.0 {
        return 0.0;
    }
    let lo = (a0 / y).powi(2);
    let m = 400;
    let h = (1.0 - lo) / m as f64;
    let g = |u: f64| bessel_absorption_cdf(3.0, 1.0, t * u / (a0 * a0));
    let mut s = g(lo) + g(1.0);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(lo + k as f64 * h);
    }
    s * h / 3.0
}

fn quantiles(v: &[f64], k: usize) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    (1..=k).map(|i| s[(i * (s.len() - 1)) / k]).collect()
}

pub(super) fn integral_form(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(20_000);
    let dt = cfg.dt.unwrap_or(1e-4);
    let draws = replicate(cfg.seed(), purpose::INTEGRAL, n, |rng, _| {
        let a = sample_wstar_conditioned(A0, rng)?;
        let path = sample_minimizing_path(a, dt * (a / A0).powi(2), rng)?;
        Ok((a, path.lifetime()))
    })?;
    let (ys, ts): (Vec<f64>, Vec<f64>) = draws.iter().copied().unzip();
    let (gy, gt) = (quantiles(&ys, 60), quantiles(&ts, 60));
    let mut sup: f64 = 0.0;
    for &y in &gy {
        for &t in &gt {
            let emp = draws.iter().filter(|&&(a, d)| a <= y && d <= t).count() as f64 / n as f64;
            sup = sup.max((emp - integral_form_cdf(A0, y, t)).abs());
        }
    }
    Ok(Verdict {
        check_id: "integral-form",
        statistic: sup,
        threshold: 0.02,
        p_value: None,
        n,
        pass: sup <= 0.02,
        notes: format!("sup joint cdf distance over a 60x60 quantile grid, a0 = {A0}"),
    }
    .into_output(
        cfg,
        vec![
            Column::new("minus_wstar", ys),
            Column::new("minimizer_duration", ts),
        ],
    ))
}

fn spine_config(cfg: &RunConfig, band: &DeepBand) -> SpineConfig {
    let mut s = SpineConfig::default();
    if let Some(e) = cfg.trunc_eps {
        s.trunc_eps = e;
    }
    if let Some(dt) = cfg.dt {
        s.path_dt = dt;
    }
    if let Some(ds) = cfg.ds {
        s.subtree.grid.ds = ds;
    }
    s.resolve_depths = vec![band.depth];
    s.min_attach_depth = Some(band.attach_depth);
    s
}

pub(super) fn spine_poisson(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(5_000);
    let alpha = cfg.alpha();
    let seed = cfg.seed();
    let a = 1.0;
    let band = DeepBand::new(a / 4.0, a / 2.0)?;
    let scfg = spine_config(cfg, &band);
    let spines = replicate(seed, purpose::SPINE, n, |rng, _| {
        let s = sample_spine(a, &scfg, rng)?;
        let lambda = deep_subtree_intensity(&s.min_path, a, &band)?;
        Ok((s.deep_count(Side::Hat, &band) as u64, lambda))
    })?;
    let (counts, lambdas): (Vec<u64>, Vec<f64>) = spines.iter().copied().unzip();
    let spine_fit = chi_square_poisson(&counts, &lambdas)?;

    let n_snake = cfg.n.map_or(SNAKE_N, |v| v.min(SNAKE_N)) as usize;
    let mut snake_cfg = snake_config(cfg, cfg.eps.unwrap_or(MINIMIZER_EPS));
    snake_cfg.refine_k = DEEP_BAND_REFINE_K;
    let (snakes, _) = conditioned_snakes(seed, 500, n_snake, &snake_cfg, &DEEP_BAND_WATCH)?;
    let snake_counts: Vec<u64> = snakes.iter().map(|s| s.hat_deep).collect();
    let snake_lambdas: Vec<f64> = snakes.iter().map(|s| s.lambda).collect();
    let snake_fit = chi_square_poisson(&snake_counts, &snake_lambdas)?;
    let resid = |f: fn(&ConditionedSnake) -> u64| -> Vec<f64> {
        snakes.iter().map(|s| f(s) as f64 - s.lambda).collect()
    };
    let rho =
        pearson_correlation(&resid(|s| s.hat_deep), &resid(|s| s.check_deep)).unwrap_or(f64::NAN);

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let meanc = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    Ok(Verdict {
        check_id: "spine-poisson",
        statistic: spine_fit.statistic,
        threshold: alpha,
        p_value: Some(spine_fit.p_value),
        n,
        pass: spine_fit.p_value > alpha && snake_fit.p_value > 0.1 * alpha,
        notes: format!(
            "spine: mean count {:.4} vs mean Lambda {:.4}, p={:.4}; snake ({} samples): mean count {:.4} vs {:.4}, \
             chi2={:.3} p={:.4} (floor {}); snake hat/check residual correlation {rho:.4}",
            meanc(&counts),
            mean(&lambdas),
            spine_fit.p_value,
            snakes.len(),
            meanc(&snake_counts),
            mean(&snake_lambdas),
            snake_fit.statistic,
            snake_fit.p_value,
            0.1 * alpha
        ),
    }
    .into_output(
        cfg,
        vec![
            Column::new("spine_hat_deep", counts.iter().map(|&c| c as f64).collect()),
            Column::new("spine_lambda", lambdas),
            Column::new("snake_hat_deep", snake_counts.iter().map(|&c| c as f64).collect()),
            Column::new("snake_lambda", snake_lambdas),
        ],
    ))
}

pub(super) fn spine_independence(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(5_000);
    let alpha = cfg.alpha();
    let seed = cfg.seed();
    let a = 1.0;
    let band = DeepBand::new(a / 4.0, a / 2.0)?;
    let scfg = spine_config(cfg, &band);
    let mut rng = RngStream::for_replicate(seed, purpose::SPINE_FIXED_PATH, 0).rng();
    let path = sample_minimizing_path(a, scfg.path_dt, &mut rng)?;
    let lambda = deep_subtree_intensity(&path, a, &band)?;
    let pairs = replicate(seed, purpose::SPINE_FIXED, n, |rng, _| {
        let (hat, check) = sample_spine_subtrees(&path, a, &scfg, rng)?;
        let count =
            |v: &[crate::snake::SubtreeRecord]| v.iter().filter(|r| band.is_deep(r, a)).count();
        Ok((count(&hat), count(&check)))
    })?;
    let kmax = pairs.iter().map(|&(h, c)| h.max(c)).max().unwrap_or(0);
    let mut table = vec![vec![0u64; kmax + 1]; kmax + 1];
    for &(h, c) in &pairs {
        table[h][c] += 1;
    }
    let chi = chi_square_independence(&table)?;
    let hat: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let check: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    let rho = pearson_correlation(&hat, &check)?;
    Ok(Verdict {
        check_id: "spine-independence",
        statistic: rho.abs(),
        threshold: 0.05,
        p_value: Some(chi.p_value),
        n,
        pass: chi.p_value > alpha && rho.abs() <= 0.05,
        notes: format!(
            "fixed minimizing path with Lambda = {lambda:.4}, duration {:.4}; chi2={:.3} p={:.4}; correlation {rho:.4}",
            path.lifetime(),
            chi.statistic,
            chi.p_value
        ),
    }
    .into_output(cfg, vec![Column::new("hat_deep", hat), Column::new("check_deep", check)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_form_marginals() {
        // t → ∞ leaves P(-W_* ≤ y | -W_* ≥ a0) = 1 - (a0/y)²
        let v = integral_form_cdf(0.5, 1.0, 1e6);
        assert!((v - 0.75).abs() < 1e-6, "{v}");
        assert_eq!(integral_form_cdf(0.5, 0.4, 1.0), 0.0);
        assert!(integral_form_cdf(0.5, 2.0, 0.1) < integral_form_cdf(0.5, 2.0, 0.2));
    }
}
