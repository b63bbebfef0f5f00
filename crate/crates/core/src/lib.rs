//! Absorption probabilities, expected absorption times and stationary
//! distributions of random leaps, computed from the roots of their
//! characteristic polynomials.

pub mod absorbing;
pub mod charpoly;
pub mod cli;
pub mod dd;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod params;
pub mod stationary;

pub use error::{LeapError, Result};
pub use params::LeapParams;
