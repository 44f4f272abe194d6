//! Finite stopped paths `w: [0, ζ] → ℝ` sampled on a time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePath {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl FinitePath {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "path needs matching non-empty grid/values, got {} and {}",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidArgument("path grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "path grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("path values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// The trivial path with zero lifetime, identified with the point `x`.
    pub fn trivial(x: f64) -> Self {
        Self {
            grid: vec![0.0],
            values: vec![x],
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.grid.len() == 1
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn lifetime(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Endpoint `ŵ = w(ζ)`.
    pub fn endpoint(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation of `w(t)`, clamped to `[0, ζ]`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.lifetime() {
            return self.endpoint();
        }
        let k = self.grid.partition_point(|&g| g <= t);
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let (x0, x1) = (self.values[k - 1], self.values[k]);
        x0 + (x1 - x0) * (t - t0) / (t1 - t0)
    }

    /// First time the path reaches `level` from above, by interpolation
    /// between the bracketing grid points.
    pub fn first_time_at_or_below(&self, level: f64) -> Option<f64> {
        if self.values[0] <= level {
            return Some(0.0);
        }
        for k in 1..self.len() {
            if self.values[k] <= level {
                let (t0, t1) = (self.grid[k - 1], self.grid[k]);
                let (x0, x1) = (self.values[k - 1], self.values[k]);
                return Some(t0 + (t1 - t0) * (x0 - level) / (x0 - x1));
            }
        }
        None
    }

    /// `τ_δ(w)`: first hitting time of `-delta`.
    pub fn hitting_time_of_negative(&self, delta: f64) -> Option<f64> {
        self.first_time_at_or_below(-delta)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// `∫_0^ζ f(w(t)) dt` by the trapezoid rule on the path grid.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        trapezoid(&self.grid, &self.values, f)
    }
}

pub(crate) fn trapezoid<F: Fn(f64) -> f64>(times: &[f64], values: &[f64], f: F) -> f64 {
    let mut acc = 0.0;
    let mut prev = f(values[0]);
    for k in 1..times.len() {
        let cur = f(values[k]);
        acc += 0.5 * (prev + cur) * (times[k] - times[k - 1]);
        prev = cur;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> FinitePath {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let values = grid.iter().map(|t| -t).collect();
        FinitePath::new(grid, values).unwrap()
    }

    #[test]
    fn trivial_path_is_its_start_point() {
        let p = FinitePath::trivial(2.5);
        assert!(p.is_trivial());
        assert_eq!(p.lifetime(), 0.0);
        assert_eq!(p.endpoint(), 2.5);
        assert_eq!(p.start(), 2.5);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FinitePath::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(FinitePath::new(vec![0.1, 0.2], vec![1.0, 1.0]).is_err());
        assert!(FinitePath::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(FinitePath::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn interpolation_and_hitting() {
        let p = line();
        assert!((p.value_at(0.35) + 0.35).abs() < 1e-12);
        assert!((p.hitting_time_of_negative(0.55).unwrap() - 0.55).abs() < 1e-12);
        assert!(p.hitting_time_of_negative(1.5).is_none());
        assert!((p.integrate(|x| x) + 0.5).abs() < 1e-12);
    }
}
