//! The named statistical checks run by `bessel-snake check`.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::stats::VerdictReport;

mod bessel;
mod snake;
mod spine;
mod superbm;

pub const DEFAULT_SEED: u64 = 20_240_917;

/// Significance level used by the goodness-of-fit checks.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Run parameters. Unset fields take the per-check defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub dt: Option<f64>,
    pub ds: Option<f64>,
    pub eps: Option<f64>,
    pub trunc_eps: Option<f64>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Fields set in `other` win.
    pub fn overridden_by(self, other: RunConfig) -> Self {
        Self {
            seed: other.seed.or(self.seed),
            n: other.n.or(self.n),
            dt: other.dt.or(self.dt),
            ds: other.ds.or(self.ds),
            eps: other.eps.or(self.eps),
            trunc_eps: other.trunc_eps.or(self.trunc_eps),
            alpha: other.alpha.or(self.alpha),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == Some(0) {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("ds", self.ds),
            ("eps", self.eps),
            ("trunc_eps", self.trunc_eps),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "alpha must lie in (0, 1), got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn n_or(&self, default: u64) -> usize {
        self.n.unwrap_or(default) as usize
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(ALPHA)
    }
}

/// One named series of raw samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutput {
    pub report: VerdictReport,
    pub columns: Vec<Column>,
}

type CheckFn = fn(&RunConfig) -> Result<CheckOutput>;

const REGISTRY: &[(&str, CheckFn)] = &[
    ("law-wstar", snake::law_wstar),
    ("girsanov-identity", bessel::girsanov_identity),
    ("laplace-bessel2", bessel::laplace_bessel2),
    ("hitting-path", snake::hitting_path),
    ("minimizer-law", snake::minimizer_law),
    ("integral-form", spine::integral_form),
    ("spine-poisson", spine::spine_poisson),
    ("spine-independence", spine::spine_independence),
    ("reversal-williams", bessel::reversal_williams),
    ("super-min-cdf", superbm::super_min_cdf),
    ("super-joint", superbm::super_joint),
    ("super-path", superbm::super_path),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|(name, _)| *name)
}

pub fn run_check(name: &str, cfg: &RunConfig) -> Result<CheckOutput> {
    cfg.validate()?;
    let (_, f) = REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Unknown {
            kind: "check",
            name: name.to_string(),
        })?;
    let start = Instant::now();
    let mut out = f(cfg)?;
    out.report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Runs every check in registry order; the first error aborts.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<CheckOutput>> {
    check_names().map(|name| run_check(name, cfg)).collect()
}

struct Verdict {
    check_id: &'static str,
    statistic: f64,
    threshold: f64,
    p_value: Option<f64>,
    n: usize,
    pass: bool,
    notes: String,
}

impl Verdict {
    fn into_output(self, cfg: &RunConfig, columns: Vec<Column>) -> CheckOutput {
        CheckOutput {
            report: VerdictReport {
                check_id: self.check_id.to_string(),
                statistic: self.statistic,
                threshold: self.threshold,
                p_value: self.p_value,
                n: self.n as u64,
                master_seed: cfg.seed(),
                runtime_seconds: 0.0,
                pass: self.pass,
                notes: self.notes,
            },
            columns,
        }
    }
}

/// `f(rng, i)` for `i` in `0..n`, each on its own stream, in index order.
fn replicate<T, F>(seed: u64, purpose: u32, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> Result<T> + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut RngStream::for_replicate(seed, purpose, i).rng(), i))
        .collect()
}

/// The first `n` accepted outcomes in replicate order, plus the number of
/// replicates consumed.
fn collect_accepted<T, F>(seed: u64, purpose: u32, n: usize, f: F) -> Result<(Vec<T>, u64)>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> Result<Option<T>> + Sync,
{
    const MAX_TRIES: u64 = 1 << 36;
    let mut out = Vec::with_capacity(n);
    let mut next = 0u64;
    let mut batch = (n as u64).max(256);
    while out.len() < n {
        if next >= MAX_TRIES {
            return Err(Error::ResourceLimit(format!(
                "only {} of {n} samples accepted after {next} tries",
                out.len()
            )));
        }
        let batch_out: Vec<(u64, Option<T>)> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::for_replicate(seed, purpose, i).rng();
                f(&mut rng, i).map(|t| (i, t))
            })
            .collect::<Result<_>>()?;
        for (i, t) in batch_out {
            if let Some(t) = t {
                out.push(t);
                if out.len() == n {
                    return Ok((out, i + 1));
                }
            }
        }
        next += batch;
        batch = batch.saturating_mul(2).min(1 << 22);
    }
    Ok((out, next))
}

/// Purpose blocks for the random streams, one per sampling role.
mod purpose {
    pub const LAW_WSTAR: u32 = 1;
    pub const GIRSANOV_DIRECT: u32 = 2;
    pub const GIRSANOV_WEIGHTED: u32 = 3;
    pub const LAPLACE: u32 = 4;
    pub const HITTING_SNAKE: u32 = 5;
    pub const HITTING_ORACLE: u32 = 6;
    pub const MINIMIZER_SNAKE: u32 = 7;
    pub const MINIMIZER_ORACLE: u32 = 8;
    pub const INTEGRAL: u32 = 9;
    pub const SPINE: u32 = 10;
    pub const SPINE_FIXED_PATH: u32 = 11;
    pub const SPINE_FIXED: u32 = 12;
    pub const REVERSAL_BESSEL: u32 = 13;
    pub const REVERSAL_BES9: u32 = 14;
    pub const SUPER_MX: u32 = 15;
    pub const SUPER_POISSON: u32 = 16;
    pub const SUPER_JOINT: u32 = 17;
    pub const SUPER_PATH: u32 = 18;
    pub const SUPER_ORACLE: u32 = 19;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_twelve_distinct_checks() {
        let mut names: Vec<_> = check_names().collect();
        assert_eq!(names.len(), 12);
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn zero_replicates_is_a_config_error() {
        let cfg = RunConfig {
            n: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            run_check("law-wstar", &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unknown_check_is_reported() {
        assert!(matches!(
            run_check("nope", &RunConfig::default()),
            Err(Error::Unknown { .. })
        ));
    }

    #[test]
    fn overrides_take_precedence() {
        let base = RunConfig {
            seed: Some(1),
            n: Some(10),
            ..Default::default()
        };
        let merged = base.overridden_by(RunConfig {
            n: Some(20),
            ..Default::default()
        });
        assert_eq!(merged.seed, Some(1));
        assert_eq!(merged.n, Some(20));
    }

    #[test]
    fn accepted_collection_is_deterministic() {
        let pick = |rng: &mut StreamRng, i: u64| {
            use rand::Rng;
            let u: f64 = rng.random();
            Ok((u < 0.3).then_some((i, u)))
        };
        let (a, used_a) = collect_accepted(5, 99, 500, pick).unwrap();
        let (b, used_b) = collect_accepted(5, 99, 500, pick).unwrap();
        assert_eq!(a, b);
        assert_eq!(used_a, used_b);
        assert_eq!(a.len(), 500);
    }
}
