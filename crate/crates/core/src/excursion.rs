//! Height-conditioned samples of the Itô excursion measure.
//!
//! Under the normalization `n(sup ζ > ε) = 1/(2ε)`, the height of an
//! excursion conditioned on exceeding `ε` satisfies `P(h > y) = ε/y`, and
//! given its height the excursion splits at its maximum into two
//! independent dimension-3 Bessel first-passage legs, the second one
//! time-reversed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open01;
use crate::sde::bessel_norm_first_passage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeExcursion {
    pub sgrid: Vec<f64>,
    pub zeta: Vec<f64>,
    pub height: f64,
    /// s-step actually used for this excursion.
    pub ds: f64,
}

impl LifetimeExcursion {
    /// `σ`, the excursion duration.
    pub fn duration(&self) -> f64 {
        *self.sgrid.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.sgrid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sgrid.is_empty()
    }

    /// Reverse the excursion in time, `s ↦ σ - s`.
    pub fn reversed(&self) -> Self {
        let sigma = self.duration();
        Self {
            sgrid: self.sgrid.iter().rev().map(|s| sigma - s).collect(),
            zeta: self.zeta.iter().rev().copied().collect(),
            height: self.height,
            ds: self.ds,
        }
    }
}

/// s-grid resolution for excursion sampling.
///
/// The effective step is `ds`, refined to at most `height²/min_steps` for
/// small excursions and coarsened to at least `height²/max_steps` for very
/// large ones so a single excursion never exceeds a memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionGrid {
    pub ds: f64,
    pub min_steps: f64,
    pub max_steps: f64,
}

impl ExcursionGrid {
    pub fn fixed(ds: f64) -> Self {
        Self {
            ds,
            min_steps: 0.0,
            max_steps: f64::INFINITY,
        }
    }

    pub fn step_for_height(&self, height: f64) -> f64 {
        let h2 = height * height;
        let mut ds = self.ds;
        if self.min_steps > 0.0 {
            ds = ds.min(h2 / self.min_steps);
        }
        if self.max_steps.is_finite() {
            ds = ds.max(h2 / self.max_steps);
        }
        ds
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ds > 0.0) || self.min_steps < 0.0 || !(self.max_steps > self.min_steps) {
            return Err(Error::InvalidConfig(format!(
                "excursion grid needs ds > 0 and 0 <= min_steps < max_steps, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Height of an excursion conditioned on `sup ζ > eps`: `eps / U`.
pub fn sample_excursion_height<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> f64 {
    eps / open01(rng)
}

/// Excursion with a given height, built from two Bessel(3) legs.
pub fn excursion_with_height<R: Rng + ?Sized>(
    height: f64,
    ds: f64,
    rng: &mut R,
) -> LifetimeExcursion {
    let (t_up, z_up) = bessel_norm_first_passage(3, height, ds, rng);
    let (t_down, z_down) = bessel_norm_first_passage(3, height, ds, rng);
    let top = *t_up.last().unwrap();
    let leg = *t_down.last().unwrap();
    let mut sgrid = t_up;
    let mut zeta = z_up;
    sgrid.reserve(t_down.len());
    zeta.reserve(z_down.len());
    for k in (0..t_down.len() - 1).rev() {
        sgrid.push(top + (leg - t_down[k]));
        zeta.push(z_down[k]);
    }
    LifetimeExcursion {
        sgrid,
        zeta,
        height,
        ds,
    }
}

/// Itô excursion conditioned on `sup ζ > eps` on a uniform s-step `ds`.
pub fn sample_ito_excursion<R: Rng + ?Sized>(
    eps: f64,
    ds: f64,
    rng: &mut R,
) -> Result<LifetimeExcursion> {
    sample_ito_excursion_on(eps, &ExcursionGrid::fixed(ds), rng)
}

pub fn sample_ito_excursion_on<R: Rng + ?Sized>(
    eps: f64,
    grid: &ExcursionGrid,
    rng: &mut R,
) -> Result<LifetimeExcursion> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    grid.validate()?;
    let height = sample_excursion_height(eps, rng);
    Ok(excursion_with_height(
        height,
        grid.step_for_height(height),
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn excursion_starts_and_ends_at_zero_and_peaks_at_height() {
        let mut rng = RngStream::new(11, 0).rng();
        for _ in 0..100 {
            let e = sample_ito_excursion(0.01, 1e-6, &mut rng).unwrap();
            assert_eq!(e.zeta[0], 0.0);
            assert_eq!(*e.zeta.last().unwrap(), 0.0);
            let max = e.zeta.iter().copied().fold(0.0, f64::max);
            assert_eq!(max, e.height);
            assert!(e.height >= 0.01);
            assert!(e.sgrid.windows(2).all(|w| w[1] > w[0]));
            assert!(e.zeta[1..e.len() - 1].iter().all(|&z| z > 0.0));
        }
    }

    #[test]
    fn reversal_is_an_involution() {
        let mut rng = RngStream::new(12, 0).rng();
        let e = sample_ito_excursion(0.05, 1e-5, &mut rng).unwrap();
        let back = e.reversed().reversed();
        assert_eq!(back.zeta, e.zeta);
        for (a, b) in back.sgrid.iter().zip(&e.sgrid) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_step_bounds() {
        let g = ExcursionGrid {
            ds: 1e-6,
            min_steps: 100.0,
            max_steps: 1e6,
        };
        assert_eq!(g.step_for_height(1.0), 1e-6);
        assert!((g.step_for_height(0.01) - 1e-6).abs() < 1e-18);
        assert!((g.step_for_height(0.001) - 1e-8).abs() < 1e-20);
        assert!((g.step_for_height(10.0) - 1e-4).abs() < 1e-16);
        assert!(ExcursionGrid::fixed(0.0).validate().is_err());
    }
}
