//! Direct samplers for the snake seen from its minimum: the law of `W_*`,
//! the minimizing path and the Poisson subtrees hanging off it.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::FinitePath;
use crate::rng::open01;
use crate::sde::{simulate_bessel, BesselConfig};
use crate::snake::{
    simulate_snake_watching, DeepBand, Side, SnakeConfig, StopRule, SubtreeRecord, Watch,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineConfig {
    /// Subtrees of height at most `trunc_eps` are not sampled.
    pub trunc_eps: f64,
    /// Time step of the minimizing path.
    pub path_dt: f64,
    /// Grid settings for the subtree excursions; `eps` is overridden by
    /// `trunc_eps`.
    pub subtree: SnakeConfig,
    /// Subtree minima are resolved finely at `-a` and at `-a + d` for each
    /// listed `d`.
    pub resolve_depths: Vec<f64>,
    /// When set to `d`, proposals branching where the path is at or below
    /// `-a + d` are not simulated.
    pub min_attach_depth: Option<f64>,
}

impl Default for SpineConfig {
    fn default() -> Self {
        Self {
            trunc_eps: 0.01,
            path_dt: 1e-4,
            subtree: SnakeConfig::new(0.01, 1e-4, 10.0),
            resolve_depths: vec![0.25],
            min_attach_depth: None,
        }
    }
}

impl SpineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.trunc_eps > 0.0)
            || !(self.path_dt > 0.0)
            || self.resolve_depths.iter().any(|&d| !(d > 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "spine needs positive trunc_eps, path_dt and resolve depths, got {self:?}"
            )));
        }
        self.subtree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineSample {
    /// `-W_*`.
    pub a: f64,
    pub min_path: FinitePath,
    pub hat_records: Vec<SubtreeRecord>,
    pub check_records: Vec<SubtreeRecord>,
    pub truncation_eps: f64,
}

impl SpineSample {
    pub fn records(&self, side: Side) -> &[SubtreeRecord] {
        match side {
            Side::Hat => &self.hat_records,
            Side::Check => &self.check_records,
        }
    }

    pub fn deep_count(&self, side: Side, band: &DeepBand) -> usize {
        self.records(side)
            .iter()
            .filter(|r| band.is_deep(r, self.a))
            .count()
    }
}

/// `a = a0/√U`: the value of `-W_*` given `W_* ≤ -a0`, since
/// `P(-W_* > y | -W_* > a0) = a0²/y²`.
pub fn sample_wstar_conditioned<R: Rng + ?Sized>(a0: f64, rng: &mut R) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "a0 must be positive, got {a0}"
        )));
    }
    Ok(a0 / open01(rng).sqrt())
}

/// `(R^(3)_t - a)` from `R^(3)_0 = a` until absorption.
pub fn sample_minimizing_path<R: Rng + ?Sized>(a: f64, dt: f64, rng: &mut R) -> Result<FinitePath> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "a must be positive, got {a}"
        )));
    }
    let path = simulate_bessel(&BesselConfig::new(3.0, a).with_dt(dt), rng)?;
    if path.horizon_exceeded() {
        return Err(Error::HorizonExceeded(path.duration()));
    }
    Ok(path.into_finite_path()?.shifted(-a))
}

/// Poisson subtrees on both sides of `min_path`. Proposals come with
/// intensity `2·dt·N_{w(t)}(sup ζ > trunc_eps)`, i.e. `ζ/trunc_eps` of them
/// per side at uniform branch times, and those whose minimum reaches `-a`
/// are discarded.
pub fn sample_spine_subtrees<R: Rng + ?Sized>(
    min_path: &FinitePath,
    a: f64,
    cfg: &SpineConfig,
    rng: &mut R,
) -> Result<(Vec<SubtreeRecord>, Vec<SubtreeRecord>)> {
    cfg.validate()?;
    check_terminal(min_path, a)?;
    let zeta = min_path.lifetime();
    let mut snake_cfg = cfg.subtree;
    snake_cfg.eps = cfg.trunc_eps;
    let stop = StopRule::AtOrBelow(-a);
    let watch: Vec<Watch> = cfg
        .resolve_depths
        .iter()
        .map(|d| Watch::FirstPassage(-a + d))
        .collect();
    let mut sides = [Vec::new(), Vec::new()];
    for (k, side) in [Side::Hat, Side::Check].into_iter().enumerate() {
        let mean = zeta / cfg.trunc_eps;
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            let t = zeta * rng.random::<f64>();
            let x = min_path.value_at(t);
            if cfg.min_attach_depth.is_some_and(|d| x <= -a + d) {
                continue;
            }
            let traj = simulate_snake_watching(x, &snake_cfg, stop, &watch, rng)?;
            if !traj.is_complete() || traj.wstar() <= -a {
                continue;
            }
            sides[k].push(SubtreeRecord {
                side,
                branch_level: t,
                attach_value: x,
                min_value: traj.wstar(),
                height: traj.height(),
                duration: traj.duration(),
            });
        }
        sides[k].sort_by(|p, q| p.branch_level.total_cmp(&q.branch_level));
    }
    let [hat, check] = sides;
    Ok((hat, check))
}

/// Complete spine sample for a given `a = -W_*`.
pub fn sample_spine<R: Rng + ?Sized>(
    a: f64,
    cfg: &SpineConfig,
    rng: &mut R,
) -> Result<SpineSample> {
    let min_path = sample_minimizing_path(a, cfg.path_dt, rng)?;
    let (hat_records, check_records) = sample_spine_subtrees(&min_path, a, cfg, rng)?;
    Ok(SpineSample {
        a,
        min_path,
        hat_records,
        check_records,
        truncation_eps: cfg.trunc_eps,
    })
}

/// Expected number of subtrees per side whose minimum lies in
/// `(-a, -a + depth]` and which branch off where the path is above
/// `-a + attach_depth`:
/// `Λ = 2∫ 1{w(t) > -a + attach_depth} [3/(2(w+a-depth)²) - 3/(2(w+a)²)] dt`.
/// The path is taken piecewise linear and each piece is integrated in
/// closed form.
pub fn deep_subtree_intensity(min_path: &FinitePath, a: f64, band: &DeepBand) -> Result<f64> {
    check_terminal(min_path, a)?;
    if band.attach_depth >= a {
        return Err(Error::InvalidArgument(format!(
            "attach depth {} must be below a = {a}",
            band.attach_depth
        )));
    }
    let c = band.depth;
    let thr = -a + band.attach_depth;
    let f = |w: f64| 1.5 / (w + a - c).powi(2) - 1.5 / (w + a).powi(2);
    // antiderivative of f in w
    let big_f = |w: f64| -1.5 / (w + a - c) + 1.5 / (w + a);
    let (grid, values) = (min_path.grid(), min_path.values());
    let mut total = 0.0;
    for k in 1..grid.len() {
        let h = grid[k] - grid[k - 1];
        let (w0, w1) = (values[k - 1], values[k]);
        if w0 <= thr && w1 <= thr {
            continue;
        }
        if (w1 - w0).abs() < 1e-14 {
            total += h * f(0.5 * (w0 + w1));
            continue;
        }
        let (lo, hi) = (w0.min(w1).max(thr), w0.max(w1));
        total += h / (w1 - w0).abs() * (big_f(hi) - big_f(lo));
    }
    Ok(2.0 * total)
}

/// Always `-a`: the accepted subtrees stay strictly above the minimum.
pub fn reconstruct_wstar(sample: &SpineSample) -> f64 {
    sample
        .hat_records
        .iter()
        .chain(&sample.check_records)
        .map(|r| r.min_value)
        .fold(-sample.a, f64::min)
}

fn check_terminal(min_path: &FinitePath, a: f64) -> Result<()> {
    if !(a > 0.0) || (min_path.endpoint() + a).abs() > 1e-9 * a.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "minimizing path must end at -a = {}, ends at {}",
            -a,
            min_path.endpoint()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn line() -> FinitePath {
        let n = 1000;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values = grid.iter().map(|t| -t).collect();
        FinitePath::new(grid, values).unwrap()
    }

    #[test]
    fn straight_line_intensity_is_five() {
        let band = DeepBand::new(0.5, 0.75).unwrap();
        let lambda = deep_subtree_intensity(&line(), 1.0, &band).unwrap();
        assert!((lambda - 5.0).abs() < 1e-12, "{lambda}");
    }

    #[test]
    fn intensity_grows_with_the_band() {
        let p = line();
        let mut prev = 0.0;
        for k in 1..=40 {
            let c = 0.0125 * k as f64;
            let band = DeepBand::new(c, 0.75).unwrap();
            let l = deep_subtree_intensity(&p, 1.0, &band).unwrap();
            assert!(l >= prev);
            prev = l;
        }
        let tiny = DeepBand::new(1e-9, 0.75).unwrap();
        assert!(deep_subtree_intensity(&p, 1.0, &tiny).unwrap() < 1e-7);
    }

    #[test]
    fn wstar_sampler_stays_above_a0() {
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..1000 {
            assert!(sample_wstar_conditioned(0.5, &mut rng).unwrap() >= 0.5);
        }
        assert!(sample_wstar_conditioned(0.0, &mut rng).is_err());
    }

    #[test]
    fn minimizing_path_runs_from_zero_to_minus_a() {
        let mut rng = RngStream::new(2, 0).rng();
        let p = sample_minimizing_path(0.7, 1e-4, &mut rng).unwrap();
        assert_eq!(p.start(), 0.0);
        assert!((p.endpoint() + 0.7).abs() < 1e-12);
        assert!(p.values()[..p.len() - 1].iter().all(|&v| v > -0.7));
    }

    #[test]
    fn spine_subtrees_stay_above_the_minimum() {
        let mut rng = RngStream::new(3, 0).rng();
        let s = sample_spine(1.0, &SpineConfig::default(), &mut rng).unwrap();
        assert_eq!(reconstruct_wstar(&s), -1.0);
        let zeta = s.min_path.lifetime();
        for r in s.hat_records.iter().chain(&s.check_records) {
            assert!(r.min_value > -1.0);
            assert!(r.branch_level >= 0.0 && r.branch_level <= zeta);
            assert!(r.height > s.truncation_eps);
        }
    }

    #[test]
    fn rejects_mismatched_terminal() {
        let band = DeepBand::new(0.25, 0.5).unwrap();
        assert!(deep_subtree_intensity(&line(), 2.0, &band).is_err());
    }
}
