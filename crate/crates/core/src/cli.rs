//! Command-line front end.
//!
//! `check <name>` prints one JSON (or CSV) verdict line per check and, with
//! `--out DIR`, writes `<name>.json` and the raw samples `<name>.csv`
//! (`series,index,value`). Exit code 0 iff every check passed, 1 if one
//! failed, 2 on errors.
//!
//! `dump <kind>` writes sample artifacts into `--out` (default `.`):
//! - `snake-trajectory`: `snake_trajectory.csv` with `s,zeta,tip` and
//!   `snake_trajectory.json` with the minimum, minimizing path and subtrees.
//! - `spine-sample`: `spine_sample.json`, a serialized spine sample.
//! - `super-samples`: `super_samples.csv` with `m_x,w0,duration` for `μ = δ_1`.
//! - `bessel-paths`: `bessel_paths.csv` with `replicate,t,value`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checks::{check_names, run_all, run_check, CheckOutput, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::path::FinitePath;
use crate::rng::RngStream;
use crate::sde::{simulate_bessel, BesselConfig};
use crate::snake::{simulate_snake, SubtreeRecord};
use crate::spine::{sample_spine, sample_wstar_conditioned, SpineConfig};
use crate::superbm::{sample_wmin, FiniteMeasure1D};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bessel-snake",
    version,
    about = "Monte Carlo checks for Bessel processes, the Brownian snake minimum and the super-Brownian minimum"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a named check, or `all`.
    Check {
        name: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write sample artifacts.
    Dump {
        kind: DumpKind,
        #[command(flatten)]
        run: RunArgs,
        /// Drift parameter of the Bessel paths for `bessel-paths`.
        #[arg(long, default_value_t = 3.0)]
        bessel_alpha: f64,
        /// Start point of the Bessel paths for `bessel-paths`.
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpKind {
    SnakeTrajectory,
    SpineSample,
    SuperSamples,
    BesselPaths,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the fields below; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replicates.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trunc_eps: Option<f64>,
    /// Significance level of the goodness-of-fit checks.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        let cfg = base.overridden_by(RunConfig {
            seed: self.seed,
            n: self.n,
            dt: self.dt,
            ds: self.ds,
            eps: self.eps,
            trunc_eps: self.trunc_eps,
            alpha: self.alpha,
            out: self.out.clone(),
            format: self.format,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check { name, run } => {
            let cfg = run.resolve()?;
            let outputs = if name == "all" {
                run_all(&cfg)?
            } else {
                vec![run_check(&name, &cfg)?]
            };
            let format = cfg.format.unwrap_or_default();
            if format == OutputFormat::Csv {
                println!("{}", CSV_HEADER);
            }
            for out in &outputs {
                println!("{}", render(out, format));
                if let Some(dir) = &cfg.out {
                    write_check(dir, out)?;
                }
            }
            Ok(outputs.iter().all(|o| o.report.pass))
        }
        Command::Dump {
            kind,
            run,
            bessel_alpha,
            r0,
        } => {
            let cfg = run.resolve()?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let written = dump(kind, &cfg, &dir, bessel_alpha, r0)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

pub fn known_check(name: &str) -> bool {
    name == "all" || check_names().any(|n| n == name)
}

const CSV_HEADER: &str = "check_id,statistic,threshold,p_value,n,master_seed,runtime_seconds,pass";

fn render(out: &CheckOutput, format: OutputFormat) -> String {
    let r = &out.report;
    match format {
        OutputFormat::Json => r.to_json_line(),
        OutputFormat::Csv => format!(
            "{},{},{},{},{},{},{:.3},{}",
            r.check_id,
            r.statistic,
            r.threshold,
            r.p_value.map_or(String::new(), |p| p.to_string()),
            r.n,
            r.master_seed,
            r.runtime_seconds,
            r.pass
        ),
    }
}

fn write_check(dir: &Path, out: &CheckOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let id = &out.report.check_id;
    std::fs::write(
        dir.join(format!("{id}.json")),
        out.report.to_json_line() + "\n",
    )?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{id}.csv")))?);
    writeln!(w, "series,index,value")?;
    for col in &out.columns {
        for (i, v) in col.values.iter().enumerate() {
            writeln!(w, "{},{i},{v}", col.name)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    eps: f64,
    wstar: f64,
    sm_index: usize,
    sm_time: f64,
    sm_lifetime: f64,
    duration: f64,
    height: f64,
    min_path: FinitePath,
    subtrees: Vec<SubtreeRecord>,
}

fn dump(
    kind: DumpKind,
    cfg: &RunConfig,
    dir: &Path,
    bessel_alpha: f64,
    r0: f64,
) -> Result<Vec<PathBuf>> {
    let seed = cfg.seed();
    let mut rng = RngStream::new(seed, 0).rng();
    let dt = cfg.dt;
    match kind {
        DumpKind::SnakeTrajectory => {
            let eps = cfg.eps.unwrap_or(0.02);
            let t = simulate_snake(eps, cfg.ds.unwrap_or(1e-4), dt.unwrap_or(1e-2), &mut rng)?;
            let csv = dir.join("snake_trajectory.csv");
            let mut w = BufWriter::new(File::create(&csv)?);
            writeln!(w, "s,zeta,tip")?;
            for ((s, z), tip) in t.sgrid().iter().zip(t.zeta()).zip(t.tips()) {
                writeln!(w, "{s},{z},{tip}")?;
            }
            w.flush()?;
            let min = t.extract_minimum();
            let summary = TrajectorySummary {
                eps,
                wstar: min.wstar,
                sm_index: min.sm_index,
                sm_time: t.sm_time(),
                sm_lifetime: t.sm_lifetime(),
                duration: t.duration(),
                height: t.height(),
                min_path: min.min_path,
                subtrees: t.subtree_decomposition()?,
            };
            let json = dir.join("snake_trajectory.json");
            serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &summary)?;
            Ok(vec![csv, json])
        }
        DumpKind::SpineSample => {
            let mut scfg = SpineConfig::default();
            if let Some(e) = cfg.trunc_eps {
                scfg.trunc_eps = e;
            }
            if let Some(d) = dt {
                scfg.path_dt = d;
            }
            let a = sample_wstar_conditioned(1.0, &mut rng)?;
            let s = sample_spine(a, &scfg, &mut rng)?;
            let json = dir.join("spine_sample.json");
            serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &s)?;
            Ok(vec![json])
        }
        DumpKind::SuperSamples => {
            let mu = FiniteMeasure1D::dirac(1.0);
            let csv = dir.join("super_samples.csv");
            let mut w = BufWriter::new(File::create(&csv)?);
            writeln!(w, "m_x,w0,duration")?;
            for _ in 0..cfg.n.unwrap_or(1000) {
                let s = sample_wmin(&mu, dt.unwrap_or(1e-4), &mut rng)?;
                let w0 = s.w0.map_or(String::new(), |v| v.to_string());
                writeln!(w, "{},{w0},{}", s.m_x, s.duration())?;
            }
            w.flush()?;
            Ok(vec![csv])
        }
        DumpKind::BesselPaths => {
            let bcfg = BesselConfig::new(bessel_alpha, r0).with_dt(dt.unwrap_or(1e-4));
            bcfg.validate()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let csv = dir.join("bessel_paths.csv");
            let mut w = BufWriter::new(File::create(&csv)?);
            writeln!(w, "replicate,t,value")?;
            for k in 0..cfg.n.unwrap_or(10) {
                let p = simulate_bessel(&bcfg, &mut rng)?;
                for (t, v) in p.times.iter().zip(&p.values) {
                    writeln!(w, "{k},{t},{v}")?;
                }
            }
            w.flush()?;
            Ok(vec![csv])
        }
    }
}
