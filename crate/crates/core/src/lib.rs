//! Monte Carlo tools for Bessel processes of negative dimension, the
//! Brownian snake minimum and the super-Brownian minimum.

pub mod checks;
pub mod cli;
pub mod error;
pub mod excursion;
pub mod path;
pub mod rng;
pub mod sde;
pub mod snake;
pub mod spine;
pub mod stats;
pub mod superbm;

pub use error::{Error, Result};
