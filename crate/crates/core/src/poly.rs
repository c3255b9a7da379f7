//! Polynomials and piecewise polynomials on a closed interval.
//!
//! Coefficients are stored in the global variable, `p(x) = c0 + c1 x + ...`.
//! Integration kernels work in local coordinates about a sub-interval's left
//! end, obtained with [`Poly::shifted`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        }
    }

    /// Coefficients of `u -> p(a + u)`.
    pub fn shifted(&self, a: f64) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        // Horner-style Taylor shift, O(n^2).
        let n = c.len();
        for i in 0..n {
            for k in (i..n.saturating_sub(1)).rev() {
                c[k] += a * c[k + 1];
            }
        }
        c
    }

    /// Coefficients of `y -> p(1 - y)`.
    pub fn reflected(&self) -> Poly {
        // p(1 - y) = sum c_k (1 - y)^k
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                out[j] += c * binom * sign;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Poly { coeffs: out }
    }

    /// Real roots in the open interval (lo, hi), for degree <= 3 via
    /// bracketing between critical points of lower derivatives.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let deg = self.trimmed_degree();
        if deg == 0 {
            return Vec::new();
        }
        let mut marks = vec![lo];
        marks.extend(self.derivative().roots_in(lo, hi));
        marks.push(hi);
        let mut roots = Vec::new();
        for w in marks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 && a > lo {
                roots.push(a);
                continue;
            }
            if fa * fb < 0.0 {
                roots.push(bisect(|x| self.eval(x), a, b));
            }
        }
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        roots
    }

    fn trimmed_degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-16 * (1.0 + m.abs()) {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A piecewise polynomial on `[breakpoints[0], breakpoints[last]]`.
///
/// Piece `i` lives on `[breakpoints[i], breakpoints[i+1]]`. Point values at
/// interior breakpoints follow the left-limit convention; at the first
/// breakpoint the right limit is used.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Poly>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput("need at least two breakpoints".into()));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || pieces.iter().flat_map(|p| &p.coeffs).any(|c| !c.is_finite())
        {
            return Err(Error::InvalidInput("non-finite breakpoint or coefficient".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        Ok(PiecewisePoly { breakpoints, pieces })
    }

    pub fn constant(lo: f64, hi: f64, c: f64) -> Self {
        PiecewisePoly {
            breakpoints: vec![lo, hi],
            pieces: vec![Poly::constant(c)],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Poly::is_zero)
    }

    /// Index of the piece used for evaluation at `x` (left-limit convention).
    pub fn piece_index(&self, x: f64) -> usize {
        let n = self.pieces.len();
        // first i with breakpoints[i+1] >= x
        let idx = self.breakpoints[1..].partition_point(|&b| b < x);
        idx.min(n - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    pub fn eval_right(&self, x: f64) -> f64 {
        let idx = self.breakpoints[1..].partition_point(|&b| b <= x);
        self.pieces[idx.min(self.pieces.len() - 1)].eval(x)
    }

    /// Average of the one-sided limits; equals `eval` away from jumps.
    pub fn eval_mid(&self, x: f64) -> f64 {
        0.5 * (self.eval(x) + self.eval_right(x))
    }

    /// Pieces restricted to `[lo, hi]`, as `(a, b, poly)` triples.
    pub fn segments_within(&self, lo: f64, hi: f64) -> Vec<(f64, f64, &Poly)> {
        let mut out = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let a = self.breakpoints[i].max(lo);
            let b = self.breakpoints[i + 1].min(hi);
            if b > a {
                out.push((a, b, p));
            }
        }
        out
    }

    /// Exact integral over `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.segments_within(lo, hi)
            .into_iter()
            .map(|(a, b, p)| {
                p.coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        let e = (k + 1) as i32;
                        c * (b.powi(e) - a.powi(e)) / e as f64
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn sup_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
            m = m.max(p.eval(a).abs()).max(p.eval(b).abs());
            for r in p.derivative().roots_in(a, b) {
                m = m.max(p.eval(r).abs());
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        PiecewisePoly {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| Poly::new(p.coeffs.iter().map(|c| c * s).collect()))
                .collect(),
        }
    }

    /// Pointwise sum on the union of breakpoints. Both must share the domain.
    pub fn add(&self, other: &Self) -> Self {
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let pieces = bps
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                let a = &self.pieces[self.piece_index(m)].coeffs;
                let b = &other.pieces[other.piece_index(m)].coeffs;
                let n = a.len().max(b.len());
                Poly::new(
                    (0..n)
                        .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
                        .collect(),
                )
            })
            .collect();
        PiecewisePoly { breakpoints: bps, pieces }
    }
}

/// Sorted union of two breakpoint lists, dropping near-duplicates.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_matches_direct_evaluation() {
        let p = Poly::new(vec![1.0, -2.0, 0.5, 3.0]);
        let a = 0.3;
        let s = Poly::new(p.shifted(a));
        for u in [0.0, 0.1, 0.7] {
            assert!((s.eval(u) - p.eval(a + u)).abs() < 1e-14);
        }
    }

    #[test]
    fn reflection_of_linear() {
        let p = Poly::new(vec![0.0, 1.0]).reflected();
        assert_eq!(p.coeffs, vec![1.0, -1.0]);
    }

    #[test]
    fn left_limit_convention() {
        let f = PiecewisePoly::new(
            vec![0.0, 0.2, 1.0],
            vec![Poly::constant(1.0), Poly::constant(0.0)],
        )
        .unwrap();
        assert_eq!(f.eval(0.2), 1.0);
        assert_eq!(f.eval_right(0.2), 0.0);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(0.3), 0.0);
        assert!((f.integral(0.0, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cubic_roots() {
        // (x - 0.2)(x - 0.5)(x - 0.9)
        let p = Poly::new(vec![-0.09, 0.73, -1.6, 1.0]);
        let r = p.roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewisePoly::new(vec![0.0, 0.0, 1.0], vec![Poly::zero(), Poly::zero()]).is_err());
        assert!(PiecewisePoly::new(vec![0.0, 1.0], vec![]).is_err());
    }
}
