use crate::error::{Error, Result};
use crate::sde::{simulate_bessel, BesselConfig};
use crate::snake::{
    count_deep, simulate_snake_watching, DeepBand, Side, SnakeConfig, StopRule, Watch,
};
use crate::spine::deep_subtree_intensity;
use crate::stats::{ks_two_sample, mean_se};

use super::{collect_accepted, purpose, replicate, CheckOutput, Column, RunConfig, Verdict};

const SNAKE_DS: f64 = 1e-4;
const SNAKE_DT: f64 = 1e-2;
const ORACLE_DT: f64 = 1e-4;

pub(super) fn snake_config(cfg: &RunConfig, eps: f64) -> SnakeConfig {
    SnakeConfig::new(eps, cfg.ds.unwrap_or(SNAKE_DS), cfg.dt.unwrap_or(SNAKE_DT))
}

fn bessel_duration(alpha: f64, r: f64, rng: &mut crate::rng::StreamRng) -> Result<f64> {
    let p = simulate_bessel(&BesselConfig::new(alpha, r).with_dt(ORACLE_DT), rng)?;
    if p.horizon_exceeded() {
        return Err(Error::HorizonExceeded(p.duration()));
    }
    Ok(p.duration())
}

pub(super) fn law_wstar(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(200_000);
    let eps = cfg.eps.unwrap_or(0.01);
    let b = 0.5;
    let scfg = snake_config(cfg, eps);
    let hits = replicate(cfg.seed(), purpose::LAW_WSTAR, n, |rng, _| {
        let t = simulate_snake_watching(0.0, &scfg, StopRule::AtOrBelow(-b), &[], rng)?;
        Ok((t.wstar() <= -b) as u8 as f64)
    })?;
    let (p, se) = mean_se(&hits);
    let target = 3.0 * eps / (b * b);
    let stat = (p - target).abs();
    Ok(Verdict {
        check_id: "law-wstar",
        statistic: stat,
        threshold: 0.01,
        p_value: None,
        n,
        pass: stat <= 0.01,
        notes: format!(
            "P(W_* <= -{b} | sup zeta > {eps}) = {p:.5} ± {se:.5}, target {target:.5}; \
             conditioning overlap bound exp(-b^2/(2 eps)) = {:.2e}",
            (-b * b / (2.0 * eps)).exp()
        ),
    }
    .into_output(cfg, vec![Column::new("hit_indicator", hits)]))
}

pub(super) fn hitting_path(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(5_000);
    let eps = cfg.eps.unwrap_or(0.01);
    let alpha = cfg.alpha();
    let b = 0.5;
    let scfg = snake_config(cfg, eps);
    let seed = cfg.seed();
    let (durations, tries) = collect_accepted(seed, purpose::HITTING_SNAKE, n, |rng, _| {
        let t = simulate_snake_watching(0.0, &scfg, StopRule::AtOrBelow(-b), &[], rng)?;
        Ok(t.first_hit_path(b).map(|p| p.lifetime()))
    })?;
    let oracle = replicate(seed, purpose::HITTING_ORACLE, n, |rng, _| {
        bessel_duration(2.0, b, rng)
    })?;
    let ks = ks_two_sample(&durations, &oracle)?;
    Ok(Verdict {
        check_id: "hitting-path",
        statistic: ks.statistic,
        threshold: alpha,
        p_value: Some(ks.p_value),
        n,
        pass: ks.p_value > alpha,
        notes: format!("{n} hitting snakes out of {tries}; oracle T^(2) from {b}"),
    }
    .into_output(
        cfg,
        vec![
            Column::new("hit_path_lifetime", durations),
            Column::new("oracle_duration", oracle),
        ],
    ))
}

/// Summary of one snake excursion conditioned on `W_* ∈ [-1.05, -0.95]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct ConditionedSnake {
    pub a: f64,
    pub duration: f64,
    pub hat_deep: u64,
    pub check_deep: u64,
    /// Deep-subtree intensity of the minimizing path for the band
    /// `(a/4, a/2)`.
    pub lambda: f64,
}

pub(super) const MINIMIZER_EPS: f64 = 0.05;
pub(super) const MINIMIZER_N: u64 = 2_000;
const WINDOW: (f64, f64) = (-0.95, -1.05);

/// Refinement that resolves the deep band `-a + a/4 = 0.75·W_*` for every
/// subtree, used when deep counts are read off the snake.
pub(super) const DEEP_BAND_WATCH: [Watch; 2] = [
    Watch::FirstPassage(-0.75),
    Watch::Band {
        frac: 0.75,
        from: -0.95,
    },
];
pub(super) const DEEP_BAND_REFINE_K: f64 = 10.0;

/// The first `n` snakes whose minimum lands in the window, and the number
/// of snakes simulated.
pub(super) fn conditioned_snakes(
    seed: u64,
    block: u32,
    n: usize,
    scfg: &SnakeConfig,
    watch: &[Watch],
) -> Result<(Vec<ConditionedSnake>, u64)> {
    let (upper, lower) = WINDOW;
    let stop = StopRule::Window { upper, lower };
    collect_accepted(seed, purpose::MINIMIZER_SNAKE + block, n, |rng, _| {
        let t = simulate_snake_watching(0.0, scfg, stop, watch, rng)?;
        if !t.is_complete() || t.wstar() > upper || t.wstar() < lower {
            return Ok(None);
        }
        let a = -t.wstar();
        let band = DeepBand::new(a / 4.0, a / 2.0)?;
        let records = t.subtree_decomposition()?;
        let lambda = deep_subtree_intensity(&t.extract_minimum().min_path, a, &band)?;
        Ok(Some(ConditionedSnake {
            a,
            duration: t.sm_lifetime(),
            hat_deep: count_deep(&records, Side::Hat, a, &band) as u64,
            check_deep: count_deep(&records, Side::Check, a, &band) as u64,
            lambda,
        }))
    })
}

/// Independent `T^(3)` draws, `per_sample` from each `a`.
fn oracle_durations(
    seed: u64,
    block: u32,
    samples: &[ConditionedSnake],
    per_sample: usize,
) -> Result<Vec<f64>> {
    replicate(
        seed,
        purpose::MINIMIZER_ORACLE + block,
        samples.len() * per_sample,
        |rng, i| bessel_duration(3.0, samples[i as usize / per_sample].a, rng),
    )
}

const ORACLE_PER_SAMPLE: usize = 5;

pub(super) fn minimizer_law(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n.unwrap_or(MINIMIZER_N) as usize;
    let eps = cfg.eps.unwrap_or(MINIMIZER_EPS);
    let seed = cfg.seed();
    let full = snake_config(cfg, eps);
    let mut half = full;
    half.grid.ds *= 0.5;
    half.dt *= 0.5;

    let mut ds_stats = Vec::new();
    let mut columns = Vec::new();
    for (k, scfg) in [full, half].iter().enumerate() {
        let (samples, tries) = conditioned_snakes(seed, 100 * k as u32, n, scfg, &[])?;
        let oracle = oracle_durations(seed, 100 * k as u32, &samples, ORACLE_PER_SAMPLE)?;
        let durations: Vec<f64> = samples.iter().map(|s| s.duration).collect();
        let d = ks_two_sample(&durations, &oracle)?.statistic;
        ds_stats.push((scfg.grid.ds, d, tries));
        let tag = if k == 0 { "full" } else { "half" };
        columns.push(Column::new(format!("minimizer_duration_{tag}"), durations));
        columns.push(Column::new(format!("oracle_duration_{tag}"), oracle));
    }
    let (d_full, d_half) = (ds_stats[0].1, ds_stats[1].1);
    let m = (n * ORACLE_PER_SAMPLE) as f64;
    let slack = 1.36 * (1.0 / n as f64 + 1.0 / m).sqrt();
    let trend_ok = d_half <= d_full + slack;
    let stat = d_full;
    Ok(Verdict {
        check_id: "minimizer-law",
        statistic: stat,
        threshold: 0.05,
        p_value: None,
        n,
        pass: stat <= 0.05 && trend_ok,
        notes: format!(
            "KS distance {d_full:.4} at ds={:.1e} ({} snakes), {d_half:.4} at ds={:.1e} ({} snakes); \
             trend requires half <= full + {slack:.4}",
            ds_stats[0].0, ds_stats[0].2, ds_stats[1].0, ds_stats[1].2
        ),
    }
    .into_output(cfg, columns))
}
