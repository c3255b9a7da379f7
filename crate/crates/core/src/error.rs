use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed piecewise data (breakpoints, coefficients, parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The operation is not defined for this kind of weight (e.g. point atoms).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The weight does not satisfy the zero-exclusion hypotheses
    /// (support ending at 1 with a nonzero, one-sided-continuous end value).
    #[error("weight hypothesis violated: {0}")]
    Hypothesis(String),

    /// The contour radius is too small to exclude zeros of the determinant.
    #[error("contour radius {radius} may enclose determinant zeros; use radius >= {suggested}")]
    PoleRisk { radius: f64, suggested: f64 },

    #[error("integrand is not finite at node {node}")]
    NonFinite { node: Complex64 },

    /// A zero of the function lies on (or too close to) the counting contour.
    #[error("|f| = {modulus:.3e} at {at} on the counting contour; perturb the rectangle")]
    ContourThroughZero { at: Complex64, modulus: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("point outside the evaluation domain: {0}")]
    Domain(String),
}
