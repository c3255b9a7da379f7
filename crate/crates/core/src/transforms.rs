//! Spectral building blocks: the determinant `Δ`, the numerators `ζ±`, the
//! data transform `H` and the Fourier transform of the initial datum.
//!
//! Each quantity has a `*_scaled` form returning a [`Scaled`] value, safe for
//! any `|Im λ|`, and a plain form returning `Complex64`.

use std::ops::Deref;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::kernel::{double_integral, exp_integral, Measure, Scaled};
use crate::poly::{PiecewisePoly, Poly};
use crate::weights::Weight;

/// A piecewise polynomial on `[0, 1]` (initial data, test functions).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSignal(PiecewisePoly);

impl SpaceSignal {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        SpaceSignal::from_poly(PiecewisePoly::new(breakpoints, pieces)?)
    }

    pub fn from_poly(p: PiecewisePoly) -> Result<Self> {
        if p.lo() != 0.0 || p.hi() != 1.0 {
            return Err(Error::InvalidInput(format!(
                "space signal must span [0,1], got [{}, {}]",
                p.lo(),
                p.hi()
            )));
        }
        Ok(SpaceSignal(p))
    }

    pub fn constant(c: f64) -> Self {
        SpaceSignal(PiecewisePoly::constant(0.0, 1.0, c))
    }

    pub fn zero() -> Self {
        SpaceSignal::constant(0.0)
    }

    /// A single polynomial on all of `[0,1]`.
    pub fn poly(coeffs: Vec<f64>) -> Self {
        SpaceSignal(PiecewisePoly::new(vec![0.0, 1.0], vec![Poly::new(coeffs)]).expect("unit interval"))
    }

    /// `c` on `[lo, hi]`, zero elsewhere.
    pub fn indicator(lo: f64, hi: f64, c: f64) -> Result<Self> {
        Ok(SpaceSignal(Weight::indicator(lo, hi, c)?.density().clone()))
    }

    pub fn as_poly(&self) -> &PiecewisePoly {
        &self.0
    }

    pub fn measure(&self) -> Measure<'_> {
        Measure::density_only(&self.0)
    }
}

impl Deref for SpaceSignal {
    type Target = PiecewisePoly;
    fn deref(&self) -> &PiecewisePoly {
        &self.0
    }
}

/// A piecewise polynomial on `[0, T]` (boundary and nonlocal data).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal(PiecewisePoly);

impl TimeSignal {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        TimeSignal::from_poly(PiecewisePoly::new(breakpoints, pieces)?)
    }

    pub fn from_poly(p: PiecewisePoly) -> Result<Self> {
        if p.lo() != 0.0 {
            return Err(Error::InvalidInput(format!("time signal must start at 0, got {}", p.lo())));
        }
        Ok(TimeSignal(p))
    }

    pub fn constant(horizon: f64, c: f64) -> Self {
        TimeSignal(PiecewisePoly::constant(0.0, horizon, c))
    }

    pub fn zero(horizon: f64) -> Self {
        TimeSignal::constant(horizon, 0.0)
    }

    pub fn poly(horizon: f64, coeffs: Vec<f64>) -> Self {
        TimeSignal(PiecewisePoly::new(vec![0.0, horizon], vec![Poly::new(coeffs)]).expect("positive horizon"))
    }

    pub fn horizon(&self) -> f64 {
        self.0.hi()
    }

    pub fn as_poly(&self) -> &PiecewisePoly {
        &self.0
    }
}

impl Deref for TimeSignal {
    type Target = PiecewisePoly;
    fn deref(&self) -> &PiecewisePoly {
        &self.0
    }
}

fn i_lambda(lambda: C64) -> C64 {
    C64::i() * lambda
}

/// `∫ K(y) e^{c y} dy` over `[0,1]`, atoms included.
pub fn weight_moment_scaled(k: &Weight, c: C64) -> Scaled {
    k.measure().exp_integral(c, 0.0, 1.0)
}

/// `Δ(λ) = ∫_0^1 K(y) cos([1-y]λ) dy`.
pub fn delta_scaled(k: &Weight, lambda: C64) -> Scaled {
    let il = i_lambda(lambda);
    let a = Scaled::exp(il) * weight_moment_scaled(k, -il);
    let b = Scaled::exp(-il) * weight_moment_scaled(k, il);
    (a + b).scale_real(0.5)
}

pub fn delta(k: &Weight, lambda: C64) -> C64 {
    delta_scaled(k, lambda).to_c64()
}

/// `ζ⁺(λ;φ)`.
pub fn zeta_plus_scaled(k: &Weight, phi: &SpaceSignal, lambda: C64) -> Scaled {
    let il = i_lambda(lambda);
    let km = k.measure();
    let pm = phi.measure();
    // K(y) cos([1-y]λ) ∫_0^y e^{-iλz} φ(z)
    let d1 = double_integral(km, -il, pm, -il);
    let d2 = double_integral(km, il, pm, -il);
    // φ(z) cos([1-z]λ) ∫_0^z K(y) e^{-iλy}
    let d3 = double_integral(pm, -il, km, -il);
    let d4 = double_integral(pm, il, km, -il);
    let up = Scaled::exp(il) * (d1 + d3);
    let down = Scaled::exp(-il) * (d2 + d4);
    (up + down).scale_real(0.5)
}

pub fn zeta_plus(k: &Weight, phi: &SpaceSignal, lambda: C64) -> C64 {
    zeta_plus_scaled(k, phi, lambda).to_c64()
}

/// `ζ⁻(λ;φ) = i ∫_0^1 K(y) ∫_y^1 sin([z-y]λ) φ(z) dz dy`.
pub fn zeta_minus_scaled(k: &Weight, phi: &SpaceSignal, lambda: C64) -> Scaled {
    let il = i_lambda(lambda);
    let km = k.measure();
    let pm = phi.measure();
    let a = double_integral(pm, il, km, -il);
    let b = double_integral(pm, -il, km, il);
    (a - b).scale_real(0.5)
}

pub fn zeta_minus(k: &Weight, phi: &SpaceSignal, lambda: C64) -> C64 {
    zeta_minus_scaled(k, phi, lambda).to_c64()
}

/// `∫_0^τ e^{μ s} g(s) ds`.
pub fn time_transform_scaled(g: &TimeSignal, mu: C64, tau: f64) -> Scaled {
    exp_integral(g.as_poly(), mu, 0.0, tau)
}

pub fn time_transform(g: &TimeSignal, mu: C64, tau: f64) -> C64 {
    time_transform_scaled(g, mu, tau).to_c64()
}

/// `∫_0^1 e^{-iλξ} q0(ξ) dξ`.
pub fn fourier_q0_scaled(q0: &SpaceSignal, lambda: C64) -> Scaled {
    exp_integral(q0.as_poly(), -i_lambda(lambda), 0.0, 1.0)
}

pub fn fourier_q0(q0: &SpaceSignal, lambda: C64) -> C64 {
    fourier_q0_scaled(q0, lambda).to_c64()
}

/// `H(λ;g0,g1,τ) = iλ e^{-iλ} ∫_0^τ e^{λ²s} g0 + (∫_0^1 K e^{-iλy}) ∫_0^τ e^{λ²s} g1`.
pub fn h_cap_scaled(k: &Weight, g0: &TimeSignal, g1: &TimeSignal, lambda: C64, tau: f64) -> Scaled {
    let il = i_lambda(lambda);
    let mu = lambda * lambda;
    let t0 = time_transform_scaled(g0, mu, tau);
    let t1 = time_transform_scaled(g1, mu, tau);
    Scaled::exp(-il) * t0 * il + weight_moment_scaled(k, -il) * t1
}

pub fn h_cap(k: &Weight, g0: &TimeSignal, g1: &TimeSignal, lambda: C64, tau: f64) -> C64 {
    h_cap_scaled(k, g0, g1, lambda, tau).to_c64()
}

/// All spectral factors at one `λ`, sharing a common scale: each stored value
/// equals the true value times `e^{-log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNumerators {
    pub lambda: C64,
    pub delta: C64,
    pub zeta_plus: C64,
    pub zeta_minus: C64,
    pub h_cap: C64,
    /// `ζ⁺ + H`
    pub num_plus: C64,
    /// `e^{-iλ} ζ⁻ + H`
    pub num_minus: C64,
    pub log_scale: f64,
}

/// Data-only numerators of the solution representation at `λ`.
pub fn numerators(
    k: &Weight,
    q0: &SpaceSignal,
    g0: &TimeSignal,
    g1: &TimeSignal,
    lambda: C64,
    tau: f64,
) -> SpectralNumerators {
    let d = delta_scaled(k, lambda);
    let zp = zeta_plus_scaled(k, q0, lambda);
    let zm = zeta_minus_scaled(k, q0, lambda);
    let h = h_cap_scaled(k, g0, g1, lambda, tau);
    let zm_shift = Scaled::exp(-i_lambda(lambda)) * zm;
    let s = if d.is_zero() { 0.0 } else { d.e };
    SpectralNumerators {
        lambda,
        delta: d.rescaled(s),
        zeta_plus: zp.rescaled(s),
        zeta_minus: zm.rescaled(s),
        h_cap: h.rescaled(s),
        num_plus: (zp + h).rescaled(s),
        num_minus: (zm_shift + h).rescaled(s),
        log_scale: s,
    }
}
