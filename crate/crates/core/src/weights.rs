//! Weight functions `K` of the nonlocal condition `∫_0^1 K(x) q(x,t) dx = g0(t)`
//! and the zero-exclusion bound for the spectral determinant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Measure;
use crate::poly::{PiecewisePoly, Poly};

/// Piecewise-polynomial weight on `[0,1]`, optionally with point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    density: PiecewisePoly,
    atoms: Vec<(f64, f64)>,
}

impl Weight {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        let density = PiecewisePoly::new(breakpoints, pieces)?;
        check_unit_domain(&density)?;
        Ok(Weight {
            density,
            atoms: Vec::new(),
        })
    }

    pub fn from_density(density: PiecewisePoly) -> Result<Self> {
        check_unit_domain(&density)?;
        Ok(Weight {
            density,
            atoms: Vec::new(),
        })
    }

    /// A purely atomic weight `Σ mass_j δ(x - x_j)`.
    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Weight::with_atoms(PiecewisePoly::constant(0.0, 1.0, 0.0), atoms)
    }

    pub fn with_atoms(density: PiecewisePoly, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        check_unit_domain(&density)?;
        if atoms
            .iter()
            .any(|&(x, m)| !(0.0..=1.0).contains(&x) || !m.is_finite())
        {
            return Err(Error::InvalidInput("atoms must lie in [0,1] with finite mass".into()));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Weight { density, atoms })
    }

    pub fn constant(c: f64) -> Self {
        Weight {
            density: PiecewisePoly::constant(0.0, 1.0, c),
            atoms: Vec::new(),
        }
    }

    /// `c` on `[lo, hi]`, zero elsewhere.
    pub fn indicator(lo: f64, hi: f64, c: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidInput(format!("bad box [{lo}, {hi}]")));
        }
        let mut bps = vec![0.0];
        let mut pieces = Vec::new();
        if lo > 0.0 {
            bps.push(lo);
            pieces.push(Poly::constant(0.0));
        }
        if hi < 1.0 {
            bps.push(hi);
        }
        pieces.push(Poly::constant(c));
        if hi < 1.0 {
            pieces.push(Poly::constant(0.0));
        }
        bps.push(1.0);
        Weight::new(bps, pieces)
    }

    pub fn density(&self) -> &PiecewisePoly {
        &self.density
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    pub fn measure(&self) -> Measure<'_> {
        Measure {
            density: &self.density,
            atoms: &self.atoms,
        }
    }

    /// `∫_0^1 dK` (density integral plus atom masses).
    pub fn total_mass(&self) -> f64 {
        self.density.integral(0.0, 1.0) + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// Pointwise value: left limit at interior breakpoints and at 1, right
    /// limit at 0.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.require_atom_free("pointwise evaluation")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [0,1]")));
        }
        Ok(self.density.eval(x))
    }

    /// `k(y) = K(1 - y)`.
    pub fn reflected(&self) -> Weight {
        let bps: Vec<f64> = self.density.breakpoints().iter().rev().map(|b| 1.0 - b).collect();
        let pieces: Vec<Poly> = self.density.pieces().iter().rev().map(Poly::reflected).collect();
        let atoms = self.atoms.iter().rev().map(|&(x, m)| (1.0 - x, m)).collect();
        Weight {
            density: PiecewisePoly::new(bps, pieces).expect("mirror of valid breakpoints"),
            atoms,
        }
    }

    /// Exact total variation on `[lo, hi]`, counting interior jumps.
    pub fn total_variation(&self, lo: f64, hi: f64) -> Result<f64> {
        self.require_atom_free("total variation")?;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidInput(format!("bad window [{lo}, {hi}]")));
        }
        let segs = self.density.segments_within(lo, hi);
        let mut v = 0.0;
        let mut prev_end: Option<f64> = None;
        for (a, b, p) in segs {
            let start = p.eval(a);
            if let Some(pe) = prev_end {
                v += (start - pe).abs();
            }
            let mut marks = vec![a];
            marks.extend(p.derivative().roots_in(a, b));
            marks.push(b);
            for w in marks.windows(2) {
                v += (p.eval(w[1]) - p.eval(w[0])).abs();
            }
            prev_end = Some(p.eval(b));
        }
        Ok(v)
    }

    /// Smallest closed interval outside which the density vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        let bps = self.density.breakpoints();
        let nz: Vec<usize> = self
            .density
            .pieces()
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, _)| i)
            .collect();
        let first = *nz.first()?;
        let last = *nz.last()?;
        Some((bps[first], bps[last + 1]))
    }

    fn require_atom_free(&self, what: &str) -> Result<()> {
        if self.has_atoms() {
            return Err(Error::Unsupported(format!("{what} of a weight with point atoms")));
        }
        Ok(())
    }

    /// Zero-exclusion bound: all zeros of `Δ` satisfy `|Im λ| < M`, so the
    /// sectors outside `|λ| = R = √2 M` are zero-free.
    pub fn zero_bound(&self) -> Result<ZeroBound> {
        self.require_atom_free("zero bound")?;
        let k = self.reflected();
        let (a, b) = k
            .support()
            .ok_or_else(|| Error::Hypothesis("weight vanishes identically".into()))?;
        // left limit at b
        let k_at_b = k.density.eval(b);
        if k_at_b == 0.0 {
            return Err(Error::Hypothesis(format!(
                "reflected weight vanishes at the end of its support (K({}) = 0)",
                1.0 - b
            )));
        }
        let v_total = k.total_variation(0.0, 1.0)?;
        let target = k_at_b.abs() / 8.0;
        let width = b - a;
        let mut delta0 = None;
        let mut d = width * (1.0 - 1e-6);
        for _ in 0..DELTA_SCAN_STEPS {
            if k.total_variation(b - d, b)? < target {
                delta0 = Some(d);
                break;
            }
            d *= DELTA_SCAN_RATIO;
        }
        let delta0 = delta0.ok_or_else(|| {
            Error::Hypothesis("reflected weight is not left-continuous at the end of its support".into())
        })?;
        let mut m = std::f64::consts::LN_2 / b;
        if v_total > 0.0 {
            m = m.max((4.0 * v_total / k_at_b.abs()).ln() / delta0);
        }
        Ok(ZeroBound {
            support_a: a,
            support_b: b,
            k_at_b,
            total_variation: v_total,
            delta0,
            m,
            r: std::f64::consts::SQRT_2 * m,
        })
    }
}

/// The δ0 scan grid: `(b-a)(1-10⁻⁶)·ρ^i`, `i = 0..DELTA_SCAN_STEPS`.
pub const DELTA_SCAN_RATIO: f64 = 0.9;
pub const DELTA_SCAN_STEPS: usize = 400;

fn check_unit_domain(p: &PiecewisePoly) -> Result<()> {
    if p.lo() != 0.0 || p.hi() != 1.0 {
        return Err(Error::InvalidInput(format!(
            "weight breakpoints must span [0,1], got [{}, {}]",
            p.lo(),
            p.hi()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroBound {
    pub support_a: f64,
    pub support_b: f64,
    pub k_at_b: f64,
    pub total_variation: f64,
    pub delta0: f64,
    pub m: f64,
    pub r: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, SQRT_2};

    fn linear() -> Weight {
        Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![0.0, 1.0])]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(Weight::constant(1.0).eval(0.5).unwrap(), 1.0);
        let bx = Weight::indicator(0.0, 0.2, 1.0).unwrap();
        assert_eq!(bx.eval(0.3).unwrap(), 0.0);
        assert_eq!(bx.eval(0.2).unwrap(), 1.0);
        assert_eq!(linear().eval(0.25).unwrap(), 0.25);
        let atomic = Weight::atomic(vec![(0.5, 1.0)]).unwrap();
        assert!(matches!(atomic.eval(0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn reflection_examples() {
        let k = Weight::indicator(0.0, 0.2, 1.0).unwrap().reflected();
        assert_eq!(k.support(), Some((0.8, 1.0)));
        assert_eq!(k.eval(0.9).unwrap(), 1.0);
        assert_eq!(k.eval(0.5).unwrap(), 0.0);
        let k = linear().reflected();
        assert!((k.eval(0.25).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(Weight::constant(1.0).reflected(), Weight::constant(1.0));
    }

    #[test]
    fn variation_examples() {
        assert_eq!(Weight::constant(1.0).total_variation(0.0, 1.0).unwrap(), 0.0);
        let k = Weight::indicator(0.8, 1.0, 1.0).unwrap();
        assert_eq!(k.total_variation(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(k.total_variation(0.85, 1.0).unwrap(), 0.0);
        assert!((linear().reflected().total_variation(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // x(1-x)·4 rises to 1 then falls back to 0
        let hump = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![0.0, 4.0, -4.0])]).unwrap();
        assert!((hump.total_variation(0.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bound_for_constant_weight() {
        let zb = Weight::constant(1.0).zero_bound().unwrap();
        assert!((zb.m - LN_2).abs() < 1e-15);
        assert!((zb.r - SQRT_2 * LN_2).abs() < 1e-15);
        assert_eq!(zb.total_variation, 0.0);
    }

    #[test]
    fn bound_for_box_weights() {
        let zb = Weight::indicator(0.0, 0.5, 1.0).unwrap().zero_bound().unwrap();
        assert_eq!((zb.support_a, zb.support_b), (0.5, 1.0));
        assert!((zb.delta0 - 0.5 * (1.0 - 1e-6)).abs() < 1e-15);
        assert!((zb.m - 4f64.ln() / zb.delta0).abs() < 1e-12);
        let zb = Weight::indicator(0.0, 0.2, 1.0).unwrap().zero_bound().unwrap();
        assert!((zb.m - 4f64.ln() / 0.2).abs() < 1e-5);
    }

    #[test]
    fn hypothesis_failures() {
        let vanishing_at_zero = linear();
        assert!(matches!(vanishing_at_zero.zero_bound(), Err(Error::Hypothesis(_))));
        assert!(matches!(Weight::constant(0.0).zero_bound(), Err(Error::Hypothesis(_))));
        let atomic = Weight::atomic(vec![(0.0, 1.0)]).unwrap();
        assert!(matches!(atomic.zero_bound(), Err(Error::Unsupported(_))));
    }

    fn piecewise_linear() -> impl Strategy<Value = Weight> {
        (1usize..5, proptest::collection::vec(-2.0f64..2.0, 12), proptest::collection::vec(0.05f64..1.0, 5))
            .prop_map(|(n, vals, gaps)| {
                let total: f64 = gaps[..n].iter().sum();
                let mut bps = vec![0.0];
                let mut acc = 0.0;
                for g in &gaps[..n - 1] {
                    acc += g / total;
                    bps.push(acc);
                }
                bps.push(1.0);
                let pieces = (0..n)
                    .map(|i| {
                        let (a, b) = (bps[i], bps[i + 1]);
                        let (ya, yb) = (vals[2 * i], vals[2 * i + 1]);
                        let slope = (yb - ya) / (b - a);
                        Poly::new(vec![ya - slope * a, slope])
                    })
                    .collect();
                Weight::new(bps, pieces).unwrap()
            })
    }

    proptest! {
        #[test]
        fn variation_dominates_differences(w in piecewise_linear(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            prop_assume!(hi - lo > 1e-9);
            let v = w.total_variation(lo, hi).unwrap();
            let inner_lo = lo + 1e-12;
            let diff = (w.eval(hi).unwrap() - w.eval(inner_lo).unwrap()).abs();
            prop_assert!(v + 1e-9 >= diff);
            let mid = 0.5 * (lo + hi);
            let split = w.total_variation(lo, mid).unwrap() + w.total_variation(mid, hi).unwrap();
            prop_assert!((split - v).abs() < 1e-9);
        }

        #[test]
        fn radius_is_root_two_times_m(w in piecewise_linear()) {
            if let Ok(zb) = w.zero_bound() {
                prop_assert!((zb.r - SQRT_2 * zb.m).abs() <= 1e-15 * zb.r);
                prop_assert!(zb.delta0 > 0.0 && zb.delta0 < zb.support_b - zb.support_a);
                let k = w.reflected();
                let v = k.total_variation(zb.support_b - zb.delta0, zb.support_b).unwrap();
                prop_assert!(v < zb.k_at_b.abs() / 8.0);
            }
        }
    }
}
