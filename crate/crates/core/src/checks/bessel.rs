use crate::error::{Error, Result};
use crate::sde::{
    girsanov_weight, sample_bessel9_to_last_passage, simulate_bessel, simulate_bessel_to_level,
    simulate_brownian_to_level, BesselConfig, StopKind,
};
use crate::stats::{ks_two_sample, mean_se};

use super::{purpose, replicate, CheckOutput, Column, RunConfig, Verdict};

const ESCAPE_MULT: f64 = 1e3;

pub(super) fn girsanov_identity(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(200_000);
    let dt = cfg.dt.unwrap_or(1e-3);
    let seed = cfg.seed();
    let (r, delta) = (1.0, 0.5);
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    let mut columns = Vec::new();
    for (k, alpha) in [2.0f64, 3.0].into_iter().enumerate() {
        let block = 100 * k as u32;
        let bcfg = BesselConfig::new(alpha, r).with_dt(dt);
        let direct = replicate(seed, purpose::GIRSANOV_DIRECT + block, n, |rng, _| {
            let p = simulate_bessel_to_level(&bcfg, delta, rng)?;
            // past the horizon only `T > horizon` is known
            Ok(match p.stop {
                StopKind::LevelHit => p.duration(),
                _ => f64::INFINITY,
            })
        })?;
        let weighted = replicate(seed, purpose::GIRSANOV_WEIGHTED + block, n, |rng, _| {
            let p = simulate_brownian_to_level(r, delta, dt, ESCAPE_MULT, rng)?;
            if p.stop != StopKind::LevelHit {
                return Ok((0.0, p.duration()));
            }
            Ok((girsanov_weight(&p, alpha, r, delta)?, p.duration()))
        })?;
        let weights: Vec<f64> = weighted.iter().map(|w| w.0).collect();
        let (wm, wse) = mean_se(&weights);
        let z_weight = (wm - 1.0).abs() / wse;

        let hit_direct: Vec<f64> = direct.iter().map(|&t| (t <= 1.0) as u8 as f64).collect();
        let hit_weighted: Vec<f64> = weighted
            .iter()
            .map(|&(w, t)| if t <= 1.0 { w } else { 0.0 })
            .collect();
        let (pd, sd) = mean_se(&hit_direct);
        let (pw, sw) = mean_se(&hit_weighted);
        let z_hit = (pd - pw).abs() / (sd * sd + sw * sw).sqrt();
        worst = worst.max(z_weight).max(z_hit);
        notes.push(format!(
            "alpha={alpha}: E[weight]={wm:.5}±{wse:.5} (z={z_weight:.2}); P(T<=1) direct={pd:.5}±{sd:.5} weighted={pw:.5}±{sw:.5} (z={z_hit:.2})"
        ));
        columns.push(Column::new(format!("weight_alpha{alpha}"), weights));
        let finite = direct.into_iter().filter(|t| t.is_finite()).collect();
        columns.push(Column::new(format!("direct_duration_alpha{alpha}"), finite));
    }
    Ok(Verdict {
        check_id: "girsanov-identity",
        statistic: worst,
        threshold: 3.0,
        p_value: None,
        n,
        pass: worst <= 3.0,
        notes: notes.join("; "),
    }
    .into_output(cfg, columns))
}

pub(super) fn laplace_bessel2(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(200_000);
    let dt = cfg.dt.unwrap_or(1e-4);
    let bcfg = BesselConfig::new(2.0, 1.0).with_dt(dt);
    let values = replicate(cfg.seed(), purpose::LAPLACE, n, |rng, _| {
        let p = simulate_bessel(&bcfg, rng)?;
        if p.horizon_exceeded() {
            return Err(Error::HorizonExceeded(p.duration()));
        }
        Ok((-3.0 * p.integrate(|x| 1.0 / (1.0 + x).powi(2))).exp())
    })?;
    let (est, se) = mean_se(&values);
    let stat = (est - 0.75).abs();
    Ok(Verdict {
        check_id: "laplace-bessel2",
        statistic: stat,
        threshold: 0.005,
        p_value: None,
        n,
        pass: stat <= 0.005,
        notes: format!("estimate {est:.5} ± {se:.5}, target 0.75"),
    }
    .into_output(cfg, vec![Column::new("laplace_functional", values)]))
}

pub(super) fn reversal_williams(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(10_000);
    let dt = cfg.dt.unwrap_or(1e-4);
    let seed = cfg.seed();
    let alpha = cfg.alpha();
    let bcfg = BesselConfig::new(3.0, 1.0).with_dt(dt);
    let absorbed = replicate(seed, purpose::REVERSAL_BESSEL, n, |rng, _| {
        let p = simulate_bessel(&bcfg, rng)?;
        if p.horizon_exceeded() {
            return Err(Error::HorizonExceeded(p.duration()));
        }
        let t = p.duration();
        Ok((t, p.value_at(0.5 * t)))
    })?;
    let last = replicate(seed, purpose::REVERSAL_BES9, n, |rng, _| {
        let p = sample_bessel9_to_last_passage(1.0, dt, 10.0, rng)?.path;
        let t = p.duration();
        Ok((t, p.value_at(0.5 * t)))
    })?;
    let (ta, ma): (Vec<f64>, Vec<f64>) = absorbed.into_iter().unzip();
    let (tl, ml): (Vec<f64>, Vec<f64>) = last.into_iter().unzip();
    let dur = ks_two_sample(&ta, &tl)?;
    let mid = ks_two_sample(&ma, &ml)?;
    let p = dur.p_value.min(mid.p_value);
    Ok(Verdict {
        check_id: "reversal-williams",
        statistic: dur.statistic.max(mid.statistic),
        threshold: alpha,
        p_value: Some(p),
        n,
        pass: p > alpha,
        notes: format!(
            "durations D={:.4} p={:.4}; mid-duration values D={:.4} p={:.4}",
            dur.statistic, dur.p_value, mid.statistic, mid.p_value
        ),
    }
    .into_output(
        cfg,
        vec![
            Column::new("absorption_duration", ta),
            Column::new("last_passage_duration", tl),
            Column::new("absorption_mid_value", ma),
            Column::new("last_passage_mid_value", ml),
        ],
    ))
}
