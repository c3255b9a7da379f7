//! Standard test problems with known behaviour.

use crate::contours::gauss_legendre;
use crate::error::Result;
use crate::multipoint::dirichlet_limit_weight;
use crate::poly::{merge_breakpoints, PiecewisePoly, Poly};
use crate::solver::HeatProblem;
use crate::transforms::{SpaceSignal, TimeSignal};
use crate::weights::Weight;

/// `∫_0^1 K(x) f(x) dx` for a piecewise-polynomial `f`, exact up to rounding.
pub fn weighted_integral(k: &Weight, f: &PiecewisePoly) -> f64 {
    let dens = k.density();
    let n = (dens.max_degree() + f.max_degree()) / 2 + 1;
    let (gx, gw) = gauss_legendre(n.max(2));
    let bps = merge_breakpoints(dens.breakpoints(), f.breakpoints());
    let mut s = 0.0;
    for w in bps.windows(2) {
        let (half, mid) = (0.5 * (w[1] - w[0]), 0.5 * (w[1] + w[0]));
        for (x, wt) in gx.iter().zip(&gw) {
            let y = mid + half * x;
            s += wt * half * dens.eval(y) * f.eval(y);
        }
    }
    s + k.atoms().iter().map(|&(y, m)| m * f.eval_mid(y)).sum::<f64>()
}

/// Constant solution `c/∫K`.
pub fn steady(k: Weight, c: f64, horizon: f64) -> Result<HeatProblem> {
    let level = c / k.total_mass();
    HeatProblem::new(
        SpaceSignal::constant(level),
        TimeSignal::constant(horizon, c),
        TimeSignal::zero(horizon),
        k,
        horizon,
    )
}

/// Problem whose solution is the heat polynomial `a(x) + t a''(x)`, for `a`
/// of degree at most 3.
pub fn heat_polynomial(k: Weight, a: Poly, horizon: f64) -> Result<HeatProblem> {
    let b = a.derivative().derivative();
    assert!(b.derivative().derivative().is_zero(), "a must be at most cubic");
    let unit = |p: &Poly| PiecewisePoly::new(vec![0.0, 1.0], vec![p.clone()]).expect("unit interval");
    let g0 = TimeSignal::poly(horizon, vec![weighted_integral(&k, &unit(&a)), weighted_integral(&k, &unit(&b))]);
    let da = a.derivative();
    let db = b.derivative();
    let g1 = TimeSignal::poly(horizon, vec![da.eval(1.0), db.eval(1.0)]);
    HeatProblem::new(SpaceSignal::poly(a.coeffs.clone()), g0, g1, k, horizon)
}

/// Exact value of [`heat_polynomial`]'s solution.
pub fn heat_polynomial_value(a: &Poly, x: f64, t: f64) -> f64 {
    a.eval(x) + t * a.derivative().derivative().eval(x)
}

/// `K = 1 - x/2`, `u = x² + 2t`.
pub fn smooth_linear_weight(horizon: f64) -> Result<(HeatProblem, Poly)> {
    let k = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![1.0, -0.5])])?;
    let a = Poly::new(vec![0.0, 0.0, 1.0]);
    Ok((heat_polynomial(k, a.clone(), horizon)?, a))
}

/// `K = 2 - 4x` on `[0, ½]`, zero after; `u = x³ + 6xt`.
pub fn smooth_ramp_weight(horizon: f64) -> Result<(HeatProblem, Poly)> {
    let k = Weight::new(vec![0.0, 0.5, 1.0], vec![Poly::new(vec![2.0, -4.0]), Poly::zero()])?;
    let a = Poly::new(vec![0.0, 0.0, 0.0, 1.0]);
    Ok((heat_polynomial(k, a.clone(), horizon)?, a))
}

/// Box weight on `(0, 0.2)`, box initial datum on `[0.4, 0.6]`, zero data.
pub fn box_scenario(horizon: f64) -> Result<HeatProblem> {
    HeatProblem::new(
        SpaceSignal::indicator(0.4, 0.6, 1.0)?,
        TimeSignal::zero(horizon),
        TimeSignal::zero(horizon),
        Weight::indicator(0.0, 0.2, 1.0)?,
        horizon,
    )
}

/// `K_j`, zero initial datum, `g0 = t`, `g1 = 0`; tends to `q(0,t) = t`.
pub fn dirichlet_limit(j: usize, horizon: f64) -> Result<HeatProblem> {
    HeatProblem::new(
        SpaceSignal::zero(),
        TimeSignal::poly(horizon, vec![0.0, 1.0]),
        TimeSignal::zero(horizon),
        dirichlet_limit_weight(j)?,
        horizon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_polynomials_satisfy_their_conditions() {
        let (p, a) = smooth_ramp_weight(1.0).unwrap();
        // ∫_0^½ (2-4x) x³ = 1/160, ∫_0^½ (2-4x) 6x = ½
        assert!((p.g0.eval(0.0) - 1.0 / 160.0).abs() < 1e-15);
        assert!((p.g0.eval(1.0) - (1.0 / 160.0 + 0.5)).abs() < 1e-14);
        assert!((p.g1.eval(0.5) - 6.0).abs() < 1e-14);
        assert!((heat_polynomial_value(&a, 0.5, 0.1) - 0.425).abs() < 1e-15);
    }
}
