//! Contour-integral solution of the heat equation on `[0,1]` with a Neumann
//! condition at `x = 1` and a weighted-average condition
//! `∫_0^1 K(x) q(x,t) dx = g0(t)`.

pub mod contours;
pub mod error;
pub mod kernel;
pub mod multipoint;
pub mod oracle;
pub mod poly;
pub mod scenarios;
pub mod solver;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
