//! Minimum of super-Brownian motion started from an atomic measure, and the
//! minimizing historical path.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::FinitePath;
use crate::rng::open01;
use crate::sde::{simulate_bessel, BesselConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub u: f64,
    pub mass: f64,
}

/// Finite atomic measure `μ = Σ mass_j δ_{u_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct FiniteMeasure1D {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for FiniteMeasure1D {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        FiniteMeasure1D::new(raw.atoms)
    }
}

impl FiniteMeasure1D {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "measure needs at least one atom".into(),
            ));
        }
        if atoms
            .iter()
            .any(|a| !a.u.is_finite() || !(a.mass > 0.0) || !a.mass.is_finite())
        {
            return Err(Error::InvalidArgument(
                "atoms need finite locations and positive finite masses".into(),
            ));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(u: f64) -> Self {
        Self {
            atoms: vec![Atom { u, mass: 1.0 }],
        }
    }

    /// Atoms at quantile midpoints of a distribution with total mass `mass`.
    pub fn from_quantiles<F: Fn(f64) -> f64>(quantile: F, n: usize, mass: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one atom".into()));
        }
        let atoms = (0..n)
            .map(|k| Atom {
                u: quantile((k as f64 + 0.5) / n as f64),
                mass: mass / n as f64,
            })
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `m = inf supp μ`.
    pub fn min_location(&self) -> f64 {
        self.atoms.iter().map(|a| a.u).fold(f64::INFINITY, f64::min)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    u: a.u + c,
                    mass: a.mass,
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Self { atoms }
    }

    /// `I(x) = Σ mass_j/(u_j - x)²`; infinite when an atom sits at `x`.
    fn exponent(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let d = a.u - x;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    a.mass / (d * d)
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperMinSample {
    pub m_x: f64,
    /// `w_min(0)`, absent when `m_X = m`.
    pub w0: Option<f64>,
    pub path: FinitePath,
}

impl SuperMinSample {
    pub fn duration(&self) -> f64 {
        self.path.lifetime()
    }
}

fn below_min(mu: &FiniteMeasure1D, x: f64) -> Result<()> {
    if !(x < mu.min_location()) {
        return Err(Error::InvalidArgument(format!(
            "x = {x} must lie below the support minimum {}",
            mu.min_location()
        )));
    }
    Ok(())
}

/// `P(m_X ≥ x) = exp(-3/2 Σ mass/(u - x)²)` for `x < m`.
pub fn cdf_mx(mu: &FiniteMeasure1D, x: f64) -> Result<f64> {
    below_min(mu, x)?;
    Ok((-1.5 * mu.exponent(x)).exp())
}

/// `P(m_X = m)`; zero when an atom sits at `m`.
pub fn atom_at_min(mu: &FiniteMeasure1D) -> f64 {
    (-1.5 * mu.exponent(mu.min_location())).exp()
}

/// Inverse-transform sample of `m_X`.
pub fn sample_mx<R: Rng + ?Sized>(mu: &FiniteMeasure1D, rng: &mut R) -> f64 {
    let v = open01(rng);
    let m = mu.min_location();
    if v <= atom_at_min(mu) {
        return m;
    }
    // solve 1.5·I(x) = -ln v; I increases as x ↑ m
    let target = -v.ln() / 1.5;
    let mut hi = m;
    let mut width = 1.0;
    let mut lo = m - width;
    while mu.exponent(lo) > target {
        hi = lo;
        width *= 2.0;
        lo = m - width;
    }
    let tol = 1e-12 * m.abs().max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mu.exponent(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Density in `y` of `P(w_min(0) ≤ a, m_X ∈ dy)`:
/// `3 Σ_{m ≤ u_j ≤ a} mass_j/(u_j - y)³ · exp(-3/2 I(y))`.
pub fn joint_density_wmin0(mu: &FiniteMeasure1D, a: f64, y: f64) -> Result<f64> {
    below_min(mu, y)?;
    let restricted: f64 = mu
        .atoms
        .iter()
        .filter(|at| at.u <= a)
        .map(|at| at.mass / (at.u - y).powi(3))
        .sum();
    Ok(3.0 * restricted * (-1.5 * mu.exponent(y)).exp())
}

/// `(m_X, w_min(0))` without the path. Given `m_X = x < m`, the start
/// point is atom `u_j` with probability proportional to `mass_j/(u_j - x)³`.
pub fn sample_wmin_start<R: Rng + ?Sized>(mu: &FiniteMeasure1D, rng: &mut R) -> (f64, Option<f64>) {
    let x = sample_mx(mu, rng);
    if x >= mu.min_location() {
        return (x, None);
    }
    let weights: Vec<f64> = mu
        .atoms
        .iter()
        .map(|a| a.mass / (a.u - x).powi(3))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut w0 = mu.atoms.last().unwrap().u;
    for (a, w) in mu.atoms.iter().zip(&weights) {
        if pick < *w {
            w0 = a.u;
            break;
        }
        pick -= w;
    }
    (x, Some(w0))
}

/// `(m_X, w_min(0), w_min)`.
pub fn sample_wmin<R: Rng + ?Sized>(
    mu: &FiniteMeasure1D,
    dt: f64,
    rng: &mut R,
) -> Result<SuperMinSample> {
    let (x, w0) = sample_wmin_start(mu, rng);
    let path = match w0 {
        Some(w0) => wmin_path(x, w0, dt, rng)?,
        None => FinitePath::trivial(x),
    };
    Ok(SuperMinSample { m_x: x, w0, path })
}

/// The minimizing path given `m_X = x` and `w_min(0) = w0`: `x + R^(3)`
/// started from `w0 - x` and run until absorption.
pub fn wmin_path<R: Rng + ?Sized>(x: f64, w0: f64, dt: f64, rng: &mut R) -> Result<FinitePath> {
    if !(w0 > x) {
        return Err(Error::InvalidArgument(format!(
            "need w0 > m_X, got w0={w0}, m_X={x}"
        )));
    }
    let bes = simulate_bessel(&BesselConfig::new(3.0, w0 - x).with_dt(dt), rng)?;
    if bes.horizon_exceeded() {
        return Err(Error::HorizonExceeded(bes.duration()));
    }
    Ok(bes.into_finite_path()?.shifted(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FloorOutcome {
    Below(f64),
    AboveFloor,
}

/// `m_X` from the Poisson cloud of excursions: for each atom the minima
/// below `floor` form a Poisson process with intensity
/// `mass·3/(u - y)³ dy`, so there are `Poisson(3 mass/(2(u - floor)²))` of
/// them, each `u - (u - floor)/√V`.
pub fn poisson_min_construction<R: Rng + ?Sized>(
    mu: &FiniteMeasure1D,
    floor: f64,
    rng: &mut R,
) -> Result<FloorOutcome> {
    below_min(mu, floor)?;
    let mut best = f64::INFINITY;
    for a in &mu.atoms {
        let d = a.u - floor;
        let mean = 1.5 * a.mass / (d * d);
        let count = Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(rng) as u64;
        for _ in 0..count {
            best = best.min(a.u - d / open01(rng).sqrt());
        }
    }
    Ok(if best.is_finite() {
        FloorOutcome::Below(best)
    } else {
        FloorOutcome::AboveFloor
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn three_atoms() -> FiniteMeasure1D {
        FiniteMeasure1D::new(vec![
            Atom { u: 0.0, mass: 0.5 },
            Atom { u: 0.7, mass: 1.0 },
            Atom { u: 2.0, mass: 2.0 },
        ])
        .unwrap()
    }

    #[test]
    fn dirac_cdf_values() {
        let mu = FiniteMeasure1D::dirac(1.0);
        assert!((cdf_mx(&mu, 0.0).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
        let two = FiniteMeasure1D::new(vec![Atom { u: 1.0, mass: 2.0 }]).unwrap();
        assert!((cdf_mx(&two, 0.0).unwrap() - (-3.0f64).exp()).abs() < 1e-15);
        assert!(cdf_mx(&mu, 1.0).is_err());
        assert!(cdf_mx(&mu, 1.0 - 1e-6).unwrap() < 1e-100);
        assert_eq!(atom_at_min(&mu), 0.0);
    }

    #[test]
    fn samples_lie_below_m_and_never_hit_an_atom_at_m() {
        let mu = three_atoms();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..10_000 {
            assert!(sample_mx(&mu, &mut rng) < 0.0);
        }
    }

    #[test]
    fn inverse_transform_hits_the_target_probability() {
        let mu = three_atoms();
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..100 {
            let x = sample_mx(&mu, &mut rng);
            assert!(cdf_mx(&mu, x).unwrap() > 0.0);
        }
    }

    #[test]
    fn joint_density_vanishes_without_atoms_below_a() {
        let mu = FiniteMeasure1D::dirac(1.0);
        assert_eq!(joint_density_wmin0(&mu, 0.5, 0.0).unwrap(), 0.0);
        assert!(joint_density_wmin0(&mu, 1.0, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn wmin_path_runs_from_w0_to_mx() {
        let mu = FiniteMeasure1D::new(vec![Atom { u: 1.0, mass: 1.0 }, Atom { u: 2.0, mass: 1.0 }])
            .unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..50 {
            let s = sample_wmin(&mu, 1e-3, &mut rng).unwrap();
            let w0 = s.w0.unwrap();
            assert!(w0 == 1.0 || w0 == 2.0);
            assert_eq!(s.path.start(), w0);
            assert!((s.path.endpoint() - s.m_x).abs() < 1e-12);
        }
    }

    #[test]
    fn atom_above_min_gives_positive_mass() {
        let mu = FiniteMeasure1D::dirac(1.0);
        let mut rng = RngStream::new(4, 0).rng();
        let far = poisson_min_construction(&mu, -1e6, &mut rng).unwrap();
        assert_eq!(far, FloorOutcome::AboveFloor);
    }

    #[test]
    fn measure_json_round_trip_validates() {
        let mu: FiniteMeasure1D =
            serde_json::from_str(r#"{"atoms":[{"u":1.0,"mass":2.0}]}"#).unwrap();
        assert_eq!(mu.total_mass(), 2.0);
        assert!(serde_json::from_str::<FiniteMeasure1D>(r#"{"atoms":[]}"#).is_err());
        assert!(
            serde_json::from_str::<FiniteMeasure1D>(r#"{"atoms":[{"u":1.0,"mass":-1.0}]}"#)
                .is_err()
        );
    }
}
