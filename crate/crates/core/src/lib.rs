//! Fractal percolation in the unit square, exact visible parts from lines and
//! external points, and seeded Monte Carlo estimates of their scaling laws.

pub mod analysis;
pub mod error;
pub mod exactgeom;
pub mod grid;
pub mod montecarlo;
pub mod scalar;
pub mod visibility;

pub use error::{Error, Result};
pub use scalar::Scalar;
