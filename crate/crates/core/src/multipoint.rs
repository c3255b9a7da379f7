//! Multipoint conditions `Σ_j b_m^j q(j/m, t) = g0(t)` with
//! `b_m^j = K(j/m)/(m+1)`, and the box family `K_j` whose limit is a
//! Dirichlet condition at `x = 0`.
//!
//! A multipoint condition is a nonlocal condition with a purely atomic
//! weight, so evaluation reuses the general solver; the explicit finite sums
//! below serve as independent checks of that reduction.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contours::ContourSpec;
use crate::error::{Error, Result};
use crate::kernel::exp_integral;
use crate::solver::{evaluate_grid_with, HeatProblem, SolutionField, TauRule};
use crate::transforms::{time_transform, SpaceSignal, TimeSignal};
use crate::weights::Weight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipointWeight {
    pub m: usize,
    pub nodes: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl MultipointWeight {
    /// Nodes `j/m`, coefficients `K(j/m)/(m+1)` (left limits at jumps of `K`).
    pub fn from_weight(k: &Weight, m: usize) -> Result<Self> {
        let nodes: Vec<f64> = if m == 0 {
            vec![0.0]
        } else {
            (0..=m).map(|j| j as f64 / m as f64).collect()
        };
        let coeffs = nodes
            .iter()
            .map(|&y| Ok(k.eval(y)? / (m + 1) as f64))
            .collect::<Result<Vec<f64>>>()?;
        Ok(MultipointWeight { m, nodes, coeffs })
    }

    pub fn new(nodes: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != coeffs.len() {
            return Err(Error::InvalidInput("nodes and coefficients must be nonempty and equal in length".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || nodes[0] < 0.0 || *nodes.last().unwrap() > 1.0 {
            return Err(Error::InvalidInput("nodes must increase strictly within [0,1]".into()));
        }
        Ok(MultipointWeight {
            m: nodes.len() - 1,
            nodes,
            coeffs,
        })
    }

    /// The same condition as a weight with point masses.
    pub fn to_weight(&self) -> Result<Weight> {
        Weight::atomic(self.nodes.iter().copied().zip(self.coeffs.iter().copied()).collect())
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.coeffs.iter().copied())
    }
}

/// `Δ_m(λ) = Σ_j b_m^j cos([1 - j/m]λ)`.
pub fn delta_m(w: &MultipointWeight, lambda: C64) -> C64 {
    w.terms().map(|(y, b)| b * ((1.0 - y) * lambda).cos()).sum()
}

/// `∫_lo^1 e^{cz} q0(z) dz`
fn tail_moment(q0: &SpaceSignal, c: C64, lo: f64) -> C64 {
    exp_integral(q0, c, lo, 1.0).to_c64()
}

/// `F_m⁺(λ) = Σ_j b_m^j [cos([1-y_j]λ) ∫_0^{y_j} e^{-iλz} q0 + e^{-iλy_j} ∫_{y_j}^1 cos([1-z]λ) q0]`.
pub fn f_plus_m(w: &MultipointWeight, q0: &SpaceSignal, lambda: C64) -> C64 {
    let il = C64::i() * lambda;
    w.terms()
        .map(|(y, b)| {
            let head = exp_integral(q0, -il, 0.0, y).to_c64();
            let cos_tail = 0.5 * (il.exp() * tail_moment(q0, -il, y) + (-il).exp() * tail_moment(q0, il, y));
            b * (((1.0 - y) * lambda).cos() * head + (-il * y).exp() * cos_tail)
        })
        .sum()
}

/// `F_m⁻(λ) = i Σ_j b_m^j ∫_{y_j}^1 sin([z - y_j]λ) q0(z) dz`.
pub fn f_minus_m(w: &MultipointWeight, q0: &SpaceSignal, lambda: C64) -> C64 {
    let il = C64::i() * lambda;
    C64::i()
        * w.terms()
            .map(|(y, b)| {
                let sin_tail = ((-il * y).exp() * tail_moment(q0, il, y) - (il * y).exp() * tail_moment(q0, -il, y))
                    / (2.0 * C64::i());
                b * sin_tail
            })
            .sum::<C64>()
}

/// `H_m(λ) = iλ e^{-iλ} T[g0] + Σ_j e^{-iλ y_j} b_m^j T[g1]` with `T[g] = ∫_0^τ e^{λ²s} g`.
pub fn h_m(w: &MultipointWeight, g0: &TimeSignal, g1: &TimeSignal, lambda: C64, tau: f64) -> C64 {
    let il = C64::i() * lambda;
    let mu = lambda * lambda;
    let kmom: C64 = w.terms().map(|(y, b)| b * (-il * y).exp()).sum();
    il * (-il).exp() * time_transform(g0, mu, tau) + kmom * time_transform(g1, mu, tau)
}

/// Problem with the multipoint condition in place of the nonlocal one.
pub fn multipoint_problem(
    w: &MultipointWeight,
    q0: &SpaceSignal,
    g0: &TimeSignal,
    g1: &TimeSignal,
    horizon: f64,
) -> Result<HeatProblem> {
    HeatProblem::new(q0.clone(), g0.clone(), g1.clone(), w.to_weight()?, horizon)
}

/// `q(x,t)` for the multipoint problem. `spec.radius` must be certified free
/// of zeros of `Δ_m` by a census; [`HeatProblem::auto_radius`] finds one.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_m(
    w: &MultipointWeight,
    q0: &SpaceSignal,
    g0: &TimeSignal,
    g1: &TimeSignal,
    x: f64,
    t: f64,
    tau: f64,
    spec: &ContourSpec,
) -> Result<C64> {
    let p = multipoint_problem(w, q0, g0, g1, g0.horizon().min(g1.horizon()))?;
    crate::solver::evaluate(&p, x, t, tau, spec)
}

/// Grid evaluation for the multipoint problem with an automatically
/// certified radius (the radius in `spec` is a lower limit).
pub fn evaluate_grid_m(
    w: &MultipointWeight,
    base: &HeatProblem,
    xs: &[f64],
    ts: &[f64],
    spec: &ContourSpec,
    tau: TauRule,
) -> Result<SolutionField> {
    let p = multipoint_problem(w, &base.q0, &base.g0, &base.g1, base.horizon)?;
    let r = p.auto_radius(p.strip_bound())?.max(spec.radius);
    p.check_radius(r, p.strip_bound())?;
    let s = ContourSpec { radius: r, ..*spec };
    evaluate_grid_with(&p, xs, ts, &s, tau)
}

/// `K_j = j` on `[0, 1/j]`, zero elsewhere.
pub fn dirichlet_limit_weight(j: usize) -> Result<Weight> {
    if j == 0 {
        return Err(Error::InvalidInput("j must be at least 1".into()));
    }
    Weight::indicator(0.0, 1.0 / j as f64, j as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use crate::transforms::{delta, h_cap, zeta_minus, zeta_plus};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn from_weight_examples() {
        let w = MultipointWeight::from_weight(&Weight::constant(1.0), 2).unwrap();
        assert_eq!(w.nodes, vec![0.0, 0.5, 1.0]);
        for b in &w.coeffs {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
        let k = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![2.0, 1.0])]).unwrap();
        let w0 = MultipointWeight::from_weight(&k, 0).unwrap();
        assert_eq!((w0.nodes.clone(), w0.coeffs.clone()), (vec![0.0], vec![2.0]));
        let boxw = Weight::indicator(0.0, 0.2, 1.0).unwrap();
        let wb = MultipointWeight::from_weight(&boxw, 10).unwrap();
        assert_eq!(wb.coeffs[0], 1.0 / 11.0);
        assert_eq!(wb.coeffs[1], 1.0 / 11.0);
        assert_eq!(wb.coeffs[2], 1.0 / 11.0);
        assert!(wb.coeffs[3..].iter().all(|&b| b == 0.0));
        assert!(MultipointWeight::from_weight(&w.to_weight().unwrap(), 3).is_err());
    }

    #[test]
    fn finite_sums_match_atomic_transforms() {
        let k = Weight::new(vec![0.0, 0.5, 1.0], vec![Poly::new(vec![1.0, -1.0]), Poly::new(vec![0.2, 0.3])]).unwrap();
        let w = MultipointWeight::from_weight(&k, 7).unwrap();
        let kw = w.to_weight().unwrap();
        let q0 = SpaceSignal::new(vec![0.0, 0.3, 1.0], vec![Poly::new(vec![1.0, 2.0]), Poly::new(vec![-1.0, 0.0, 3.0])]).unwrap();
        let g0 = TimeSignal::poly(1.0, vec![0.5, 1.0]);
        let g1 = TimeSignal::poly(1.0, vec![-1.0, 0.0, 2.0]);
        for l in [c(0.7, 0.0), c(3.0, 2.0), c(-5.0, -1.5), c(0.0, 4.0)] {
            let d = delta_m(&w, l);
            assert!((d - delta(&kw, l)).norm() < 1e-12 * (1.0 + d.norm()));
            let fp = f_plus_m(&w, &q0, l);
            assert!((fp - zeta_plus(&kw, &q0, l)).norm() < 1e-11 * (1.0 + fp.norm()), "{l}");
            let fm = f_minus_m(&w, &q0, l);
            assert!((fm - zeta_minus(&kw, &q0, l)).norm() < 1e-11 * (1.0 + fm.norm()), "{l}");
            let h = h_m(&w, &g0, &g1, l, 0.3);
            assert!((h - h_cap(&kw, &g0, &g1, l, 0.3)).norm() < 1e-11 * (1.0 + h.norm()));
        }
    }

    #[test]
    fn degenerate_values() {
        let k = Weight::constant(1.0);
        let w = MultipointWeight::from_weight(&k, 5).unwrap();
        let z = C64::new(0.0, 0.0);
        assert!((delta_m(&w, z) - 1.0).norm() < 1e-15);
        assert_eq!(f_minus_m(&w, &SpaceSignal::constant(1.0), z), z);
        assert_eq!(f_plus_m(&w, &SpaceSignal::zero(), c(1.0, 1.0)), z);
        let w0 = MultipointWeight::from_weight(&k, 0).unwrap();
        assert!((delta_m(&w0, c(1.3, 0.2)) - c(1.3, 0.2).cos()).norm() < 1e-15);
    }

    #[test]
    fn riemann_sum_rate() {
        let k = Weight::constant(1.0);
        let l = c(2.0, 0.5);
        let exact = delta(&k, l);
        let e20 = (delta_m(&MultipointWeight::from_weight(&k, 20).unwrap(), l) - exact).norm();
        let e40 = (delta_m(&MultipointWeight::from_weight(&k, 40).unwrap(), l) - exact).norm();
        let slope = (e40 / e20).log2();
        assert!(slope < -0.9, "{slope}");
    }

    #[test]
    fn dirichlet_limit_family() {
        let k1 = dirichlet_limit_weight(1).unwrap();
        assert_eq!(k1.eval(0.7).unwrap(), 1.0);
        let k5 = dirichlet_limit_weight(5).unwrap();
        assert!((k5.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(k5.eval(0.1).unwrap(), 5.0);
        assert_eq!(k5.eval(0.3).unwrap(), 0.0);
        assert!(dirichlet_limit_weight(0).is_err());
    }

    #[test]
    fn single_point_condition_is_dirichlet_at_zero() {
        // b = 1 at x = 0: q(0,t) = g0(t); u = x² - 2x + 2t solves it with
        // g0 = 2t, g1 = 0
        let w = MultipointWeight::new(vec![0.0], vec![1.0]).unwrap();
        let q0 = SpaceSignal::poly(vec![0.0, -2.0, 1.0]);
        let g0 = TimeSignal::poly(1.0, vec![0.0, 2.0]);
        let g1 = TimeSignal::zero(1.0);
        let spec = ContourSpec::default();
        for (x, t) in [(0.3, 0.05), (0.8, 0.2)] {
            let v = evaluate_m(&w, &q0, &g0, &g1, x, t, t, &spec).unwrap();
            assert!((v - (x * x - 2.0 * x + 2.0 * t)).norm() < 1e-10, "{v}");
        }
    }
}
