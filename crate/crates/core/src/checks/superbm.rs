use crate::error::{Error, Result};
use crate::sde::{simulate_bessel, BesselConfig};
use crate::stats::{ks_one_sample, ks_two_sample};
use crate::superbm::{
    cdf_mx, poisson_min_construction, sample_mx, sample_wmin_start, wmin_path, Atom,
    FiniteMeasure1D, FloorOutcome,
};

use super::{collect_accepted, purpose, replicate, CheckOutput, Column, RunConfig, Verdict};

fn three_atoms() -> FiniteMeasure1D {
    FiniteMeasure1D::new(vec![
        Atom { u: 0.0, mass: 0.5 },
        Atom { u: 0.7, mass: 1.0 },
        Atom { u: 2.0, mass: 2.0 },
    ])
    .expect("valid fixture")
}

/// `P(m_X ≤ x)`.
fn mx_cdf(mu: &FiniteMeasure1D, x: f64) -> f64 {
    if x >= mu.min_location() {
        1.0
    } else {
        1.0 - cdf_mx(mu, x).expect("x below the support")
    }
}

pub(super) fn super_min_cdf(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(100_000);
    let seed = cfg.seed();
    let alpha = cfg.alpha();
    let fixtures = [
        ("dirac1", FiniteMeasure1D::dirac(1.0)),
        ("three_atoms", three_atoms()),
    ];
    let mut worst_d: f64 = 0.0;
    let mut worst_p: f64 = 1.0;
    let mut notes = Vec::new();
    let mut columns = Vec::new();
    for (k, (name, mu)) in fixtures.iter().enumerate() {
        let block = 100 * k as u32;
        let xs = replicate(seed, purpose::SUPER_MX + block, n, |rng, _| {
            Ok(sample_mx(mu, rng))
        })?;
        let d = ks_one_sample(&xs, |x| mx_cdf(mu, x))?.statistic;

        let floor = mu.min_location() - 1.0;
        let (below, _) = collect_accepted(seed, purpose::SUPER_MX + block + 50, n, |rng, _| {
            let x = sample_mx(mu, rng);
            Ok((x < floor).then_some(x))
        })?;
        let (poisson, _) = collect_accepted(seed, purpose::SUPER_POISSON + block, n, |rng, _| {
            Ok(match poisson_min_construction(mu, floor, rng)? {
                FloorOutcome::Below(y) => Some(y),
                FloorOutcome::AboveFloor => None,
            })
        })?;
        let mutual = ks_two_sample(&below, &poisson)?;
        worst_d = worst_d.max(d);
        worst_p = worst_p.min(mutual.p_value);
        notes.push(format!(
            "{name}: sup|ECDF-F|={d:.5}; mutual KS below {floor}: D={:.4} p={:.4}",
            mutual.statistic, mutual.p_value
        ));
        columns.push(Column::new(format!("mx_{name}"), xs));
        columns.push(Column::new(format!("mx_poisson_{name}"), poisson));
    }
    Ok(Verdict {
        check_id: "super-min-cdf",
        statistic: worst_d,
        threshold: 0.01,
        p_value: Some(worst_p),
        n,
        pass: worst_d < 0.01 && worst_p > alpha,
        notes: notes.join("; "),
    }
    .into_output(cfg, columns))
}

/// Composite Simpson rule on `[0, 1]` with `m` (even) intervals.
fn simpson01<F: Fn(f64) -> f64>(f: F, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

/// `P(w0 = 1 | m_X ≤ 0)` for `μ = δ_1 + δ_2` by quadrature of the joint
/// density `3/(1-y)³ · exp(-3/2 I(y))` over `y ≤ 0`.
pub(super) fn joint_oracle() -> f64 {
    let i = |y: f64| 1.0 / (1.0 - y).powi(2) + 1.0 / (2.0 - y).powi(2);
    let dens = |y: f64| 3.0 / (1.0 - y).powi(3) * (-1.5 * i(y)).exp();
    // y = -v/(1-v)
    let g = |v: f64| {
        if v >= 1.0 {
            return 0.0;
        }
        let y = -v / (1.0 - v);
        dens(y) / (1.0 - v).powi(2)
    };
    let num = simpson01(g, 20_000);
    let den = 1.0 - (-1.5 * i(0.0)).exp();
    num / den
}

pub(super) fn super_joint(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(100_000);
    let mu = FiniteMeasure1D::new(vec![Atom { u: 1.0, mass: 1.0 }, Atom { u: 2.0, mass: 1.0 }])?;
    let draws = replicate(cfg.seed(), purpose::SUPER_JOINT, n, |rng, _| {
        Ok(sample_wmin_start(&mu, rng))
    })?;
    let cond: Vec<f64> = draws
        .iter()
        .filter(|(x, _)| *x <= 0.0)
        .map(|(_, w0)| w0.unwrap_or(f64::NAN))
        .collect();
    if cond.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "super-joint conditional draws",
            have: 0,
            need: 1,
        });
    }
    let k = cond.len() as f64;
    let freq = cond.iter().filter(|&&w| w == 1.0).count() as f64 / k;
    let q = joint_oracle();
    let sigma = (q * (1.0 - q) / k).sqrt();
    let z = (freq - q).abs() / sigma;
    Ok(Verdict {
        check_id: "super-joint",
        statistic: z,
        threshold: 3.0,
        p_value: None,
        n,
        pass: z <= 3.0,
        notes: format!(
            "P(w0=1 | m_X<=0): empirical {freq:.5} over {} draws, quadrature {q:.5}, sigma {sigma:.5}",
            cond.len()
        ),
    }
    .into_output(cfg, vec![Column::new("w0_given_mx_le_0", cond)]))
}

pub(super) fn super_path(cfg: &RunConfig) -> Result<CheckOutput> {
    let n = cfg.n_or(5_000);
    let dt = cfg.dt.unwrap_or(1e-4);
    let seed = cfg.seed();
    let alpha = cfg.alpha();
    let mu = FiniteMeasure1D::dirac(1.0);
    let (samples, tries) = collect_accepted(seed, purpose::SUPER_PATH, n, |rng, _| {
        let (x, w0) = sample_wmin_start(&mu, rng);
        if !(-1.1..=-0.9).contains(&x) {
            return Ok(None);
        }
        let w0 = w0.expect("m_X below the support has a start point");
        let path = wmin_path(x, w0, dt, rng)?;
        Ok(Some((w0 - x, path.lifetime())))
    })?;
    let oracle = replicate(seed, purpose::SUPER_ORACLE, n, |rng, i| {
        let r = samples[i as usize].0;
        let p = simulate_bessel(&BesselConfig::new(3.0, r).with_dt(dt), rng)?;
        if p.horizon_exceeded() {
            return Err(Error::HorizonExceeded(p.duration()));
        }
        Ok(p.duration())
    })?;
    let durations: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ks = ks_two_sample(&durations, &oracle)?;
    Ok(Verdict {
        check_id: "super-path",
        statistic: ks.statistic,
        threshold: alpha,
        p_value: Some(ks.p_value),
        n,
        pass: ks.p_value > alpha,
        notes: format!("{n} accepted of {tries} draws with m_X in [-1.1, -0.9]"),
    }
    .into_output(
        cfg,
        vec![
            Column::new("wmin_duration", durations),
            Column::new("oracle_duration", oracle),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson01(|x| x * x * x - x + 2.0, 4);
        assert!((v - 1.75).abs() < 1e-14);
    }

    #[test]
    fn joint_oracle_is_a_probability_near_its_weight_ratio() {
        let q = joint_oracle();
        // at y = 0 the atom weights are 1 and 1/8
        assert!(q > 0.5 && q < 1.0, "{q}");
    }
}
