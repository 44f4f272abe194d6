//! Numerical kernels for Brownian motion, Brownian bridges and Bessel
//! processes `dR = dB - (α/R) dt` absorbed at 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{trapezoid, FinitePath};
use crate::rng::{open01, std_normal};

/// Default base time step for the Bessel kernels.
pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselConfig {
    pub alpha: f64,
    pub r0: f64,
    pub dt: f64,
    pub absorb_eps: f64,
    pub max_time: f64,
}

impl BesselConfig {
    /// Defaults: `dt = 1e-4`, absorption band `1e-4·max(r0, 1)` and a horizon
    /// far in the tail of the absorption time.
    pub fn new(alpha: f64, r0: f64) -> Self {
        Self {
            alpha,
            r0,
            dt: DEFAULT_DT,
            absorb_eps: 1e-4 * r0.max(1.0),
            max_time: 50.0 * r0.max(1.0).powi(2),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Dimension `d = 1 - 2α`.
    pub fn dimension(&self) -> f64 {
        1.0 - 2.0 * self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.r0 >= 0.0 && self.r0.is_finite()) {
            return bad(format!("r0 must be nonnegative, got {}", self.r0));
        }
        if !(self.dt > 0.0) || !(self.absorb_eps > 0.0) || !(self.max_time > 0.0) {
            return bad("dt, absorb_eps and max_time must be positive".into());
        }
        if self.r0 > 0.0 && self.absorb_eps >= self.r0 {
            return bad(format!(
                "absorb_eps {} must be below r0 {}",
                self.absorb_eps, self.r0
            ));
        }
        Ok(())
    }

    /// Below this radius the step is shrunk like `(R / r_ref)^2`, which keeps
    /// the drift displacement `α·h/R` under a tenth of `R`.
    fn refinement_radius(&self) -> f64 {
        (10.0 * self.absorb_eps).max((10.0 * self.alpha * self.dt).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// Entered the absorption band; terminal value projected to 0.
    Absorbed,
    /// First passage at a prescribed level.
    LevelHit,
    /// Last passage at a prescribed level.
    LastPassage,
    /// Safety horizon reached before the stopping time.
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stop: StopKind,
}

impl SamplePath {
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn horizon_exceeded(&self) -> bool {
        self.stop == StopKind::Horizon
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        trapezoid(&self.times, &self.values, f)
    }

    /// Value at time `t` by linear interpolation; absorbed paths stay at 0.
    pub fn value_at(&self, t: f64) -> f64 {
        if t >= self.duration() {
            return self.terminal();
        }
        let k = self.times.partition_point(|&g| g <= t).max(1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (x0, x1) = (self.values[k - 1], self.values[k]);
        x0 + (x1 - x0) * (t - t0) / (t1 - t0)
    }

    pub fn into_finite_path(self) -> Result<FinitePath> {
        FinitePath::new(self.times, self.values)
    }

    pub fn reversed(&self) -> SamplePath {
        let total = self.duration();
        let times = self.times.iter().rev().map(|t| total - t).collect();
        let values = self.values.iter().rev().copied().collect();
        SamplePath {
            times,
            values,
            stop: self.stop,
        }
    }
}

fn bessel_euler<R: Rng + ?Sized>(
    cfg: &BesselConfig,
    level: Option<f64>,
    rng: &mut R,
) -> SamplePath {
    let mut times = vec![0.0];
    let mut values = vec![cfg.r0];
    if cfg.r0 <= cfg.absorb_eps {
        values[0] = 0.0;
        return SamplePath {
            times,
            values,
            stop: StopKind::Absorbed,
        };
    }
    let r_ref = cfg.refinement_radius();
    let mut t = 0.0;
    let mut r = cfg.r0;
    loop {
        let h = cfg.dt * (r / r_ref).powi(2).min(1.0);
        let next = r + h.sqrt() * std_normal(rng) - cfg.alpha * h / r;
        let t_next = t + h;
        if let Some(delta) = level {
            if next <= delta {
                times.push(t + h * (r - delta) / (r - next));
                values.push(delta);
                return SamplePath {
                    times,
                    values,
                    stop: StopKind::LevelHit,
                };
            }
            // the continuous path may dip below the level between grid points
            let p_cross = (-2.0 * (r - delta) * (next - delta) / h).exp();
            if rng.random::<f64>() < p_cross {
                times.push(t + h * (r - delta) / ((r - delta) + (next - delta)));
                values.push(delta);
                return SamplePath {
                    times,
                    values,
                    stop: StopKind::LevelHit,
                };
            }
        }
        if next <= cfg.absorb_eps {
            times.push(t_next);
            values.push(0.0);
            return SamplePath {
                times,
                values,
                stop: StopKind::Absorbed,
            };
        }
        times.push(t_next);
        values.push(next);
        t = t_next;
        r = next;
        if t >= cfg.max_time {
            return SamplePath {
                times,
                values,
                stop: StopKind::Horizon,
            };
        }
    }
}

/// Euler–Maruyama path of `R^(α)` from `r0` until absorption at 0.
pub fn simulate_bessel<R: Rng + ?Sized>(cfg: &BesselConfig, rng: &mut R) -> Result<SamplePath> {
    cfg.validate()?;
    Ok(bessel_euler(cfg, None, rng))
}

/// `R^(α)` from `r0` stopped at the first passage at `delta < r0`.
pub fn simulate_bessel_to_level<R: Rng + ?Sized>(
    cfg: &BesselConfig,
    delta: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    cfg.validate()?;
    if !(delta > 0.0 && delta < cfg.r0) {
        return Err(Error::InvalidArgument(format!(
            "level {delta} must lie in (0, r0 = {})",
            cfg.r0
        )));
    }
    Ok(bessel_euler(cfg, Some(delta.max(cfg.absorb_eps)), rng))
}

/// Brownian motion from `r` stopped at the first passage at `delta < r`.
///
/// The step grows like `(B/r)^2` above `r` so that excursions far from the
/// level stay cheap; paths escaping above `escape_mult·r` are returned with
/// [`StopKind::Horizon`].
pub fn simulate_brownian_to_level<R: Rng + ?Sized>(
    r: f64,
    delta: f64,
    dt: f64,
    escape_mult: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    if !(delta > 0.0 && delta < r) || !(dt > 0.0) || !(escape_mult > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < delta < r, dt > 0, escape_mult > 1 (delta={delta}, r={r}, dt={dt})"
        )));
    }
    let escape = escape_mult * r;
    let mut times = vec![0.0];
    let mut values = vec![r];
    let mut t = 0.0;
    let mut b = r;
    loop {
        let h = dt * (b / r).powi(2).max(1.0);
        let next = b + h.sqrt() * std_normal(rng);
        let crossed =
            next <= delta || rng.random::<f64>() < (-2.0 * (b - delta) * (next - delta) / h).exp();
        if crossed {
            let frac = if next <= delta {
                (b - delta) / (b - next)
            } else {
                (b - delta) / ((b - delta) + (next - delta))
            };
            times.push(t + h * frac);
            values.push(delta);
            return Ok(SamplePath {
                times,
                values,
                stop: StopKind::LevelHit,
            });
        }
        t += h;
        b = next;
        times.push(t);
        values.push(b);
        if b >= escape {
            return Ok(SamplePath {
                times,
                values,
                stop: StopKind::Horizon,
            });
        }
    }
}

/// Change-of-measure weight turning Brownian motion stopped at `T_δ` into
/// `R^(α)` stopped at `T^(α)_δ`:
/// `(r/δ)^α · exp(-α(1+α)/2 · ∫_0^{T_δ} ds / B_s^2)`.
pub fn girsanov_weight(path: &SamplePath, alpha: f64, r: f64, delta: f64) -> Result<f64> {
    if !(alpha > 0.0 && r > 0.0 && delta > 0.0 && delta < r) {
        return Err(Error::InvalidArgument(format!(
            "need alpha > 0 and 0 < delta < r (alpha={alpha}, r={r}, delta={delta})"
        )));
    }
    if path.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "girsanov weight needs a strictly positive path".into(),
        ));
    }
    if (path.terminal() - delta).abs() > 1e-9 || (path.values[0] - r).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "path must run from {r} to {delta}, got {} to {}",
            path.values[0],
            path.terminal()
        )));
    }
    let integral = path.integrate(|b| 1.0 / (b * b));
    let log_w = alpha * (r / delta).ln() - 0.5 * alpha * (1.0 + alpha) * integral;
    Ok(log_w.exp())
}

/// First passage at `level` of the norm of a `dim`-dimensional Brownian
/// motion started at the origin: a Bessel process of dimension `dim` from 0,
/// exact on the grid. The crossing time is linearly interpolated and the
/// terminal value set to `level`.
pub fn bessel_norm_first_passage<R: Rng + ?Sized>(
    dim: usize,
    level: f64,
    ds: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0f64; dim];
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let sd = ds.sqrt();
    let mut t = 0.0;
    let mut r = 0.0;
    loop {
        let mut sq = 0.0;
        for xi in x.iter_mut() {
            *xi += sd * std_normal(rng);
            sq += *xi * *xi;
        }
        let next = sq.sqrt();
        if next >= level {
            times.push(t + ds * (level - r) / (next - r));
            values.push(level);
            return (times, values);
        }
        t += ds;
        r = next;
        times.push(t);
        values.push(r);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastPassageSample {
    pub path: SamplePath,
    /// Probability that the process returns below `a` after leaving
    /// `cutoff_mult·a`, i.e. `cutoff_mult^-7`.
    pub return_probability_bound: f64,
}

/// Dimension-9 Bessel process from 0 (norm of a 9-dimensional Brownian
/// motion), run until it exceeds `cutoff_mult·a` and truncated at its last
/// passage at `a`.
pub fn sample_bessel9_to_last_passage<R: Rng + ?Sized>(
    a: f64,
    dt: f64,
    cutoff_mult: f64,
    rng: &mut R,
) -> Result<LastPassageSample> {
    if !(a > 0.0) || !(dt > 0.0) || !(cutoff_mult >= 10.0) {
        return Err(Error::InvalidArgument(format!(
            "need a > 0, dt > 0, cutoff_mult >= 10 (a={a}, dt={dt}, cutoff_mult={cutoff_mult})"
        )));
    }
    const DIM: usize = 9;
    let cutoff = cutoff_mult * a;
    let mut x = [0.0f64; DIM];
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let mut last_below = 0usize;
    let mut t = 0.0;
    let mut r = 0.0f64;
    while r < cutoff {
        // far above `a` the step can grow without missing a return below it
        let h = if r > a {
            dt.max(((r - a) / 5.0).powi(2))
        } else {
            dt
        };
        let sd = h.sqrt();
        let mut sq = 0.0;
        for xi in x.iter_mut() {
            *xi += sd * std_normal(rng);
            sq += *xi * *xi;
        }
        r = sq.sqrt();
        t += h;
        times.push(t);
        values.push(r);
        if r <= a {
            last_below = times.len() - 1;
        }
    }
    let (t0, r0) = (times[last_below], values[last_below]);
    let (t1, r1) = (times[last_below + 1], values[last_below + 1]);
    let crossing = t0 + (t1 - t0) * (a - r0) / (r1 - r0);
    times.truncate(last_below + 1);
    values.truncate(last_below + 1);
    if crossing > t0 {
        times.push(crossing);
        values.push(a);
    } else {
        *values.last_mut().unwrap() = a;
    }
    Ok(LastPassageSample {
        path: SamplePath {
            times,
            values,
            stop: StopKind::LastPassage,
        },
        return_probability_bound: cutoff_mult.powi(-((DIM - 2) as i32)),
    })
}

/// Brownian bridge from `(t0, x0)` to `(t1, x1)` evaluated at `t`.
pub fn bridge_point<R: Rng + ?Sized>(
    t0: f64,
    x0: f64,
    t1: f64,
    x1: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::DegenerateInterval(span));
    }
    if !(t >= t0 && t <= t1) {
        return Err(Error::InvalidArgument(format!(
            "bridge time {t} outside [{t0}, {t1}]"
        )));
    }
    Ok(bridge_point_unchecked(t0, x0, t1, x1, t, rng))
}

#[inline]
pub(crate) fn bridge_point_unchecked<R: Rng + ?Sized>(
    t0: f64,
    x0: f64,
    t1: f64,
    x1: f64,
    t: f64,
    rng: &mut R,
) -> f64 {
    let span = t1 - t0;
    let w = (t - t0) / span;
    let var = (t - t0) * (t1 - t) / span;
    x0 + (x1 - x0) * w + var.max(0.0).sqrt() * std_normal(rng)
}

/// Brownian bridge from `(t0, x0)` to `(t1, x1)` conditioned to stay above
/// `floor`, evaluated at `t`. This is a BES(3) bridge shifted by `floor`: the
/// norm of a 3-d bridge whose far endpoint direction follows the matching
/// von Mises-Fisher law.
pub(crate) fn bridge_point_above<R: Rng + ?Sized>(
    t0: f64,
    x0: f64,
    t1: f64,
    x1: f64,
    floor: f64,
    t: f64,
    rng: &mut R,
) -> f64 {
    let (r1, r2) = ((x0 - floor).max(0.0), (x1 - floor).max(0.0));
    let span = t1 - t0;
    let kappa = r1 * r2 / span;
    let cos = if kappa > 1e-12 {
        let u = open01(rng);
        (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
    } else {
        2.0 * rng.random::<f64>() - 1.0
    };
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let w = (t - t0) / span;
    let sd = ((t - t0) * (t1 - t) / span).max(0.0).sqrt();
    let z = [
        r1 + (r2 * cos - r1) * w + sd * std_normal(rng),
        r2 * sin * w + sd * std_normal(rng),
        sd * std_normal(rng),
    ];
    floor + (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()
}

/// Minimum of a Brownian bridge of duration `span` between `x0` and `x1`, by
/// inverting `P(min ≤ y) = exp(-2(x0-y)(x1-y)/span)`.
#[inline]
pub fn bridge_minimum_value<R: Rng + ?Sized>(x0: f64, x1: f64, span: f64, rng: &mut R) -> f64 {
    let u = open01(rng);
    let d = x1 - x0;
    0.5 * (x0 + x1 - (d * d - 2.0 * span * u.ln()).sqrt())
}

/// Closed-form law of the bridge minimum, `P(min ≤ y)`.
pub fn bridge_minimum_cdf(x0: f64, x1: f64, span: f64, y: f64) -> f64 {
    if y >= x0.min(x1) {
        1.0
    } else {
        (-2.0 * (x0 - y) * (x1 - y) / span).exp()
    }
}

/// Location and value of the minimum of a Brownian bridge.
pub fn bridge_minimum<R: Rng + ?Sized>(
    t0: f64,
    x0: f64,
    t1: f64,
    x1: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::DegenerateInterval(span));
    }
    let m = bridge_minimum_value(x0, x1, span, rng);
    Ok((
        t0 + span * bridge_argmin_fraction(x0 - m, x1 - m, span, rng),
        m,
    ))
}

/// Position in `[0, 1]` of the minimum given the depths `a = x0 - m` and
/// `b = x1 - m` below the endpoints. Given the minimum, the two sides are
/// first-passage legs, so the location density is proportional to
/// `u^{-3/2} e^{-A/u} (1-u)^{-3/2} e^{-B/(1-u)}` with `A = a²/2T`,
/// `B = b²/2T`. Sampled by rejection from truncated Lévy laws on each half.
pub(crate) fn bridge_argmin_fraction<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    span: f64,
    rng: &mut R,
) -> f64 {
    use statrs::function::erf::{erfc, erfc_inv};
    if a <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 {
        return 1.0;
    }
    let (aa, bb) = (a * a / (2.0 * span), b * b / (2.0 * span));
    // ∫_0^{1/2} v^{-3/2} e^{-c/v} dv = sqrt(π/c) erfc(sqrt(2c))
    let tail = |c: f64| erfc((2.0 * c).sqrt());
    let (ta, tb) = (tail(aa), tail(bb));
    let w_left = (-bb).exp() * ta / aa.sqrt();
    let w_right = (-aa).exp() * tb / bb.sqrt();
    if !(w_left + w_right > 0.0) {
        return a / (a + b);
    }
    let p_left = w_left / (w_left + w_right);
    loop {
        let left = rng.random::<f64>() < p_left;
        let (c, t, other) = if left { (aa, ta, bb) } else { (bb, tb, aa) };
        let x = erfc_inv(open01(rng) * t);
        let v = (c / (x * x)).min(0.5);
        let w = 1.0 - v;
        let accept = (2.0 * w).powf(-1.5) * (other - other / w).exp();
        if rng.random::<f64>() < accept {
            return if left { v } else { 1.0 - v };
        }
    }
}

/// Hitting time of 0 for `R^(α)` from `r`: the law of `r² / (2·G)` with
/// `G ~ Gamma(α + 1/2, 1)`. Returns `P(T ≤ t)`.
pub fn bessel_absorption_cdf(alpha: f64, r: f64, t: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Gamma};
    if t <= 0.0 {
        return 0.0;
    }
    let g = Gamma::new(alpha + 0.5, 1.0).expect("positive shape");
    // T ≤ t  ⇔  G ≥ r²/(2t)
    g.sf(r * r / (2.0 * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn started_at_zero_is_absorbed_immediately() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = simulate_bessel(&BesselConfig::new(2.0, 0.0), &mut rng).unwrap();
        assert_eq!(p.stop, StopKind::Absorbed);
        assert_eq!(p.duration(), 0.0);
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn absorbed_paths_end_exactly_at_zero() {
        for k in 0..50 {
            let mut rng = RngStream::new(2, k).rng();
            let p = simulate_bessel(&BesselConfig::new(3.0, 1.0), &mut rng).unwrap();
            assert_eq!(p.stop, StopKind::Absorbed);
            assert_eq!(p.terminal(), 0.0);
            assert!(p.times.windows(2).all(|w| w[1] > w[0]));
            assert!(p.values[..p.values.len() - 1].iter().all(|&v| v > 0.0));
            assert_eq!(p.value_at(p.duration() + 1.0), 0.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(BesselConfig::new(0.0, 1.0).validate().is_err());
        assert!(BesselConfig::new(1.0, -1.0).validate().is_err());
        let mut c = BesselConfig::new(1.0, 1e-5);
        c.absorb_eps = 1e-4;
        assert!(c.validate().is_err());
        assert_eq!(BesselConfig::new(3.0, 1.0).dimension(), -5.0);
    }

    #[test]
    fn level_stop_ends_on_the_level() {
        let mut rng = RngStream::new(3, 0).rng();
        let cfg = BesselConfig::new(2.0, 1.0);
        for _ in 0..20 {
            let p = simulate_bessel_to_level(&cfg, 0.5, &mut rng).unwrap();
            assert_eq!(p.stop, StopKind::LevelHit);
            assert_eq!(p.terminal(), 0.5);
        }
        let cfg = BesselConfig::new(3.0, 2.0);
        let p = simulate_bessel_to_level(&cfg, 2.0 - 1e-9, &mut rng).unwrap();
        assert!(p.duration() < 1e-6, "duration {}", p.duration());
        assert!(simulate_bessel_to_level(&cfg, 2.5, &mut rng).is_err());
    }

    #[test]
    fn girsanov_weight_is_bounded_and_rejects_nonpositive_paths() {
        let mut rng = RngStream::new(4, 0).rng();
        for _ in 0..50 {
            let p = simulate_brownian_to_level(1.0, 0.5, 1e-3, 1e3, &mut rng).unwrap();
            if p.stop != StopKind::LevelHit {
                continue;
            }
            let w = girsanov_weight(&p, 2.0, 1.0, 0.5).unwrap();
            assert!(w > 0.0 && w <= 4.0);
        }
        let bad = SamplePath {
            times: vec![0.0, 1.0, 2.0],
            values: vec![1.0, -0.1, 0.5],
            stop: StopKind::LevelHit,
        };
        assert!(girsanov_weight(&bad, 2.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn bridge_minimum_dominates_endpoints() {
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..1000 {
            let (t, m) = bridge_minimum(0.0, 0.3, 2.0, -0.4, &mut rng).unwrap();
            assert!(m <= -0.4);
            assert!((0.0..=2.0).contains(&t));
        }
        assert!(bridge_minimum(1.0, 0.0, 1.0, 0.0, &mut rng).is_err());
        assert!(bridge_point(1.0, 0.0, 0.5, 0.0, 0.7, &mut rng).is_err());
    }

    #[test]
    fn last_passage_reports_bound() {
        let mut rng = RngStream::new(6, 0).rng();
        let s = sample_bessel9_to_last_passage(1.0, 1e-3, 10.0, &mut rng).unwrap();
        assert!((s.return_probability_bound - 1e-7).abs() < 1e-20);
        assert_eq!(s.path.terminal(), 1.0);
        assert_eq!(s.path.values[0], 0.0);
        assert!(s.path.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn absorption_cdf_has_the_optional_stopping_mean() {
        // E[T] = r²/(2α-1) via ∫ (1 - F) dt
        let (alpha, r) = (3.0, 1.0);
        let (mut acc, h) = (0.0, 1e-4);
        let mut t = 0.0;
        while t < 200.0 {
            acc += h * (1.0 - bessel_absorption_cdf(alpha, r, t + 0.5 * h));
            t += h;
        }
        assert!((acc - 0.2).abs() < 1e-3, "mean {acc}");
    }
}
