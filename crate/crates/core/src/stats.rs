//! Goodness-of-fit machinery and the verdict record every check produces.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

use crate::error::{Error, Result};

pub const KS_MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub check_id: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub n: u64,
    pub master_seed: u64,
    pub runtime_seconds: f64,
    pub pass: bool,
    pub notes: String,
}

impl VerdictReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report is plain data")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn finite_sorted(samples: &[f64], what: &'static str, need: usize) -> Result<Vec<f64>> {
    if samples.len() < need {
        return Err(Error::InsufficientSamples {
            what,
            have: samples.len(),
            need,
        });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("{what}: NaN sample")));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `P(K > λ)` for the Kolmogorov limit law.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestResult> {
    let v = finite_sorted(samples, "ks_one_sample", KS_MIN_SAMPLES)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(TestResult {
        statistic: d,
        p_value: ks_p(d, n),
    })
}

/// Sup distance between the two empirical cdfs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let x = finite_sorted(a, "ks_two_sample", 1)?;
    let y = finite_sorted(b, "ks_two_sample", 1)?;
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                what: "ks_two_sample",
                have: s.len(),
                need: KS_MIN_SAMPLES,
            });
        }
    }
    let d = ks_distance(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    Ok(TestResult {
        statistic: d,
        p_value: ks_p(d, n * m / (n + m)),
    })
}

fn chi_square_sf(stat: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64).expect("positive df").sf(stat)
}

/// Merge adjacent cells (tails first) until every expected count is at
/// least `min_expected`. Returns the merged (observed, expected) pairs.
fn merge_cells(observed: &[f64], expected: &[f64], min_expected: f64) -> Vec<(f64, f64)> {
    let mut cells: Vec<(f64, f64)> = observed
        .iter()
        .copied()
        .zip(expected.iter().copied())
        .collect();
    while cells.len() > 1 && cells.last().unwrap().1 < min_expected {
        let (o, e) = cells.pop().unwrap();
        let last = cells.last_mut().unwrap();
        last.0 += o;
        last.1 += e;
    }
    while cells.len() > 1 && cells[0].1 < min_expected {
        let (o, e) = cells.remove(0);
        cells[0].0 += o;
        cells[0].1 += e;
    }
    let mut k = 1;
    while k + 1 < cells.len() {
        if cells[k].1 < min_expected {
            let (o, e) = cells.remove(k);
            cells[k].0 += o;
            cells[k].1 += e;
        } else {
            k += 1;
        }
    }
    cells
}

/// Chi-square goodness of fit of counts `counts[i] ~ Poisson(lambdas[i])`.
/// Expected frequencies are the mixture `Σ_i pmf(k; λ_i)`, with the upper
/// tail folded into the last cell and sparse cells merged.
pub fn chi_square_poisson(counts: &[u64], lambdas: &[f64]) -> Result<TestResult> {
    if counts.len() != lambdas.len() {
        return Err(Error::InvalidArgument(
            "counts and lambdas differ in length".into(),
        ));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(
            "Poisson means must be finite and >= 0".into(),
        ));
    }
    let kmax = counts.iter().copied().max().unwrap_or(0).max(
        lambdas
            .iter()
            .map(|l| (l + 10.0 * l.sqrt() + 10.0) as u64)
            .max()
            .unwrap_or(0),
    ) as usize;
    let mut expected = vec![0.0; kmax + 1];
    for &l in lambdas {
        if l == 0.0 {
            expected[0] += 1.0;
            continue;
        }
        let p = Poisson::new(l).expect("positive mean");
        let mut acc = 0.0;
        for (k, e) in expected.iter_mut().enumerate().take(kmax) {
            let q = p.pmf(k as u64);
            *e += q;
            acc += q;
        }
        expected[kmax] += (1.0 - acc).max(0.0);
    }
    let mut observed = vec![0.0; kmax + 1];
    for &c in counts {
        observed[(c as usize).min(kmax)] += 1.0;
    }
    let cells = merge_cells(&observed, &expected, 5.0);
    if cells.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "chi_square_poisson cells",
            have: cells.len(),
            need: 2,
        });
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(TestResult {
        statistic: stat,
        p_value: chi_square_sf(stat, cells.len() - 1),
    })
}

/// Pearson chi-square test of independence on a contingency table. Trailing
/// rows and columns are merged while they carry an expected count below 5.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<TestResult> {
    let cols = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("ragged contingency table".into()));
    }
    let mut t: Vec<Vec<f64>> = table
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    // drop empty rows and columns
    t.retain(|r| r.iter().sum::<f64>() > 0.0);
    if t.is_empty() {
        return Err(Error::InsufficientSamples {
            what: "chi_square_independence",
            have: 0,
            need: 1,
        });
    }
    let keep: Vec<usize> = (0..cols)
        .filter(|&j| t.iter().map(|r| r[j]).sum::<f64>() > 0.0)
        .collect();
    t = t
        .iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect();

    let total: f64 = t.iter().flatten().sum();
    loop {
        let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
        let colsum: Vec<f64> = (0..t[0].len())
            .map(|j| t.iter().map(|r| r[j]).sum())
            .collect();
        let min_col = colsum.iter().copied().fold(f64::INFINITY, f64::min);
        let min_row = rows.iter().copied().fold(f64::INFINITY, f64::min);
        let last_row_low = t.len() > 2 && rows[t.len() - 1] * min_col / total < 5.0;
        let last_col_low = t[0].len() > 2 && colsum[t[0].len() - 1] * min_row / total < 5.0;
        if last_row_low {
            let r = t.pop().unwrap();
            for (x, y) in t.last_mut().unwrap().iter_mut().zip(r) {
                *x += y;
            }
        } else if last_col_low {
            for r in t.iter_mut() {
                let y = r.pop().unwrap();
                *r.last_mut().unwrap() += y;
            }
        } else {
            break;
        }
    }
    let (nr, nc) = (t.len(), t[0].len());
    if nr < 2 || nc < 2 {
        return Err(Error::InsufficientSamples {
            what: "chi_square_independence categories",
            have: nr.min(nc),
            need: 2,
        });
    }
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let colsum: Vec<f64> = (0..nc).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for i in 0..nr {
        for j in 0..nc {
            let e = rows[i] * colsum[j] / total;
            stat += (t[i][j] - e).powi(2) / e;
        }
    }
    Ok(TestResult {
        statistic: stat,
        p_value: chi_square_sf(stat, (nr - 1) * (nc - 1)),
    })
}

/// Mean and normal-approximation half width at confidence `level`.
pub fn mc_mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            what: "mc_mean_ci",
            have: samples.len(),
            need: 2,
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must be in (0,1), got {level}"
        )));
    }
    let (mean, se) = mean_se(samples);
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(0.5 + level / 2.0);
    Ok((mean, z * se))
}

/// Sample mean and its standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientSamples {
            what: "pearson_correlation",
            have: x.len().min(y.len()),
            need: 3,
        });
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument(
            "correlation of a constant sample".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Empirical cdf evaluated at `x` on pre-sorted data.
pub fn ecdf_sorted(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}
