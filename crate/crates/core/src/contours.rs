//! Integration contours in the spectral plane and the quadrature rules on them.
//!
//! * `∂D_R⁺`: in along the ray `arg λ = 3π/4`, clockwise along `|λ| = R` to
//!   `arg λ = π/4`, out along that ray. The sector lies to the left.
//! * `∂D_R⁻`: the mirror image, in along `arg λ = -π/4`, out along `-3π/4`.
//! * real line, left to right.
//! * `γ⁺` (`Im λ = +h`) left to right and `γ⁻` (`Im λ = -h`) right to left,
//!   with `h = R/√2`, so the strip between them lies to the right.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on any truncation length.
pub const MAX_TRUNCATION: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourSpec {
    pub radius: f64,
    /// Truncation: rays stop at `|λ| = max_abs_lambda`, lines at `|Re λ| = max_abs_lambda`.
    pub max_abs_lambda: f64,
    /// Panels per unit length where the integrand is slowly varying.
    pub panels_per_unit: usize,
    /// Gauss–Legendre nodes per panel.
    pub panel_order: usize,
    pub tail_tolerance: f64,
    /// Largest `t` the contour must resolve: the factor `e^{-λ²t}` oscillates
    /// with local rate `2|λ|t` along the rays.
    pub chirp_time: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec {
            radius: 1.0,
            max_abs_lambda: MAX_TRUNCATION,
            panels_per_unit: 1,
            panel_order: 16,
            tail_tolerance: 1e-13,
            chirp_time: 0.0,
        }
    }
}

impl ContourSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.max_abs_lambda > 0.0) {
            return Err(Error::InvalidInput("max_abs_lambda must be positive".into()));
        }
        if self.panel_order < 4 {
            return Err(Error::InvalidInput("panel_order must be at least 4".into()));
        }
        if self.panels_per_unit == 0 {
            return Err(Error::InvalidInput("panels_per_unit must be at least 1".into()));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::InvalidInput("tail_tolerance must lie in (0,1)".into()));
        }
        if !(self.chirp_time >= 0.0) {
            return Err(Error::InvalidInput("chirp_time must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_truncation(&self, max_abs: f64) -> Self {
        ContourSpec {
            max_abs_lambda: max_abs,
            ..*self
        }
    }

    /// Local panel length at distance `r` from the origin.
    fn panel_length(&self, r: f64) -> f64 {
        let omega = 1.0 + 2.0 * r * self.chirp_time;
        (1.0 / self.panels_per_unit as f64).min(3.0 * PI / omega)
    }

    /// Panel breakpoints covering `[lo, hi]` with the local panel length.
    fn panel_breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = vec![lo];
        let mut r = lo;
        while r < hi {
            let l0 = self.panel_length(r);
            let l = self.panel_length(r + l0);
            let next = r + l;
            if next >= hi - 1e-3 * l {
                break;
            }
            out.push(next);
            r = next;
        }
        out.push(hi);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContourLabel {
    Dplus,
    Dminus,
    RealLine,
    GammaPlus,
    GammaMinus,
}

#[derive(Debug, Clone)]
pub struct QuadContour {
    pub nodes: Vec<C64>,
    /// Quadrature weights including the direction factor `dλ`.
    pub weights: Vec<C64>,
    pub label: ContourLabel,
    pub panel_order: usize,
    /// Panels adjacent to a truncated end, used for tail estimates.
    pub tail_panels: Vec<usize>,
}

impl QuadContour {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_count(&self) -> usize {
        self.nodes.len() / self.panel_order
    }

    fn new(label: ContourLabel, order: usize) -> Self {
        QuadContour {
            nodes: Vec::new(),
            weights: Vec::new(),
            label,
            panel_order: order,
            tail_panels: Vec::new(),
        }
    }

    /// Append a straight segment `λ(s) = base + dir·s`, `s ∈ [s0, s1]`
    /// (s1 may be less than s0), split at the given panel breaks.
    fn push_segment(&mut self, gl: &(Vec<f64>, Vec<f64>), base: C64, dir: C64, breaks: &[f64], reverse: bool) {
        let mut panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
        if reverse {
            panels.reverse();
            for p in panels.iter_mut() {
                *p = (p.1, p.0);
            }
        }
        for (s0, s1) in panels {
            let half = 0.5 * (s1 - s0);
            let mid = 0.5 * (s0 + s1);
            for (x, w) in gl.0.iter().zip(&gl.1) {
                self.nodes.push(base + dir * (mid + half * x));
                self.weights.push(dir * (half * w));
            }
        }
    }

    /// Append a circular arc of radius `r` from angle `th0` to `th1`.
    fn push_arc(&mut self, gl: &(Vec<f64>, Vec<f64>), r: f64, th0: f64, th1: f64, panels: usize) {
        let dth = (th1 - th0) / panels as f64;
        for p in 0..panels {
            let a = th0 + p as f64 * dth;
            let mid = a + 0.5 * dth;
            for (x, w) in gl.0.iter().zip(&gl.1) {
                let th = mid + 0.5 * dth * x;
                let lam = C64::from_polar(r, th);
                self.nodes.push(lam);
                self.weights.push(C64::i() * lam * (0.5 * dth * w));
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn arc_panels(spec: &ContourSpec, arc_len: f64) -> usize {
    ((arc_len / spec.panel_length(spec.radius)).ceil() as usize).max(2)
}

fn build_sector(spec: &ContourSpec, upper: bool) -> QuadContour {
    let gl = gauss_legendre(spec.panel_order);
    let label = if upper { ContourLabel::Dplus } else { ContourLabel::Dminus };
    let mut c = QuadContour::new(label, spec.panel_order);
    let r = spec.radius;
    let rmax = spec.max_abs_lambda.min(MAX_TRUNCATION);
    let (th_in, th_out) = if upper {
        (3.0 * FRAC_PI_4, FRAC_PI_4)
    } else {
        (-FRAC_PI_4, -3.0 * FRAC_PI_4)
    };
    let has_rays = rmax > r;
    let breaks = if has_rays { spec.panel_breaks(r, rmax) } else { Vec::new() };
    if has_rays {
        c.push_segment(&gl, C64::new(0.0, 0.0), C64::from_polar(1.0, th_in), &breaks, true);
        c.tail_panels.push(0);
    }
    let npan = arc_panels(spec, 0.5 * PI * r);
    c.push_arc(&gl, r, th_in, th_out, npan);
    if has_rays {
        c.push_segment(&gl, C64::new(0.0, 0.0), C64::from_polar(1.0, th_out), &breaks, false);
        c.tail_panels.push(c.panel_count() - 1);
    }
    c
}

/// `∂D_R⁺`, truncated at `|λ| = spec.max_abs_lambda`.
pub fn build_dplus(spec: &ContourSpec) -> QuadContour {
    build_sector(spec, true)
}

/// `∂D_R⁻`, truncated at `|λ| = spec.max_abs_lambda`.
pub fn build_dminus(spec: &ContourSpec) -> QuadContour {
    build_sector(spec, false)
}

fn symmetric_breaks(spec: &ContourSpec, amax: f64) -> Vec<f64> {
    let half = spec.panel_breaks(0.0, amax);
    let mut all: Vec<f64> = half.iter().rev().map(|v| -v).collect();
    all.extend_from_slice(&half[1..]);
    all
}

/// `[-max_abs, max_abs]` on the real axis, left to right.
pub fn build_realline(spec: &ContourSpec) -> QuadContour {
    let gl = gauss_legendre(spec.panel_order);
    let mut c = QuadContour::new(ContourLabel::RealLine, spec.panel_order);
    let amax = spec.max_abs_lambda.min(MAX_TRUNCATION);
    let breaks = symmetric_breaks(spec, amax);
    c.push_segment(&gl, C64::new(0.0, 0.0), C64::new(1.0, 0.0), &breaks, false);
    c.tail_panels = vec![0, c.panel_count() - 1];
    c
}

/// Horizontal line `Im λ = sign·R/√2`, `|Re λ| ≤ max_abs`; `γ⁺` runs left to
/// right and `γ⁻` right to left.
pub fn build_gamma(spec: &ContourSpec, sign: i32) -> QuadContour {
    let gl = gauss_legendre(spec.panel_order);
    let upper = sign >= 0;
    let label = if upper { ContourLabel::GammaPlus } else { ContourLabel::GammaMinus };
    let mut c = QuadContour::new(label, spec.panel_order);
    let h = spec.radius / SQRT_2;
    let amax = spec.max_abs_lambda.min(MAX_TRUNCATION);
    let breaks = symmetric_breaks(spec, amax);
    let base = C64::new(0.0, if upper { h } else { -h });
    c.push_segment(&gl, base, C64::new(1.0, 0.0), &breaks, !upper);
    c.tail_panels = vec![0, c.panel_count() - 1];
    c
}

/// `Σ w_k f(λ_k)`, summed panel by panel in a fixed order.
pub fn integrate<F>(contour: &QuadContour, f: F) -> Result<C64>
where
    F: Fn(C64) -> C64 + Sync,
{
    integrate_with_tail(contour, f).map(|(v, _)| v)
}

/// Like [`integrate`], also returning the summed magnitude of the panels at
/// the truncated ends (a proxy for the neglected tail).
pub fn integrate_with_tail<F>(contour: &QuadContour, f: F) -> Result<(C64, f64)>
where
    F: Fn(C64) -> C64 + Sync,
{
    let order = contour.panel_order;
    let sums: Vec<Result<C64>> = contour
        .nodes
        .par_chunks(order)
        .zip(contour.weights.par_chunks(order))
        .map(|(nodes, weights)| {
            let mut s = C64::new(0.0, 0.0);
            for (&l, &w) in nodes.iter().zip(weights) {
                let v = f(l);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite { node: l });
                }
                s += w * v;
            }
            Ok(s)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    let mut tail = 0.0;
    for (i, s) in sums.into_iter().enumerate() {
        let s = s?;
        total += s;
        if contour.tail_panels.contains(&i) {
            tail += s.norm();
        }
    }
    Ok((total, tail))
}

/// Axis-aligned rectangle `[re0, re1] × [im0, im1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Self {
        Rect { re0, re1, im0, im1 }
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re0, self.im0),
            C64::new(self.re1, self.im0),
            C64::new(self.re1, self.im1),
            C64::new(self.re0, self.im1),
        ]
    }

    /// Split across the longer side, slightly off-centre so that symmetric
    /// zero sets do not land on the cut.
    pub fn split(&self) -> (Rect, Rect) {
        const FRACTION: f64 = 0.5 + 0.0371;
        if self.re1 - self.re0 >= self.im1 - self.im0 {
            let m = self.re0 + FRACTION * (self.re1 - self.re0);
            (Rect { re1: m, ..*self }, Rect { re0: m, ..*self })
        } else {
            let m = self.im0 + FRACTION * (self.im1 - self.im0);
            (Rect { im1: m, ..*self }, Rect { im0: m, ..*self })
        }
    }

    pub fn width(&self) -> f64 {
        (self.re1 - self.re0).max(self.im1 - self.im0)
    }
}

/// Largest argument increment accepted between neighbouring samples.
const MAX_ARG_STEP: f64 = 0.4;
const MAX_DEPTH: u32 = 48;
/// `|f|` below this fraction of the boundary maximum counts as a boundary zero.
const MIN_MODULUS_RATIO: f64 = 1e-11;

struct Tracker<'a, F> {
    f: &'a F,
    min_mod: f64,
    min_at: C64,
    max_mod: f64,
}

impl<F: Fn(C64) -> C64> Tracker<'_, F> {
    fn eval(&mut self, z: C64) -> Result<C64> {
        let v = (self.f)(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { node: z });
        }
        let m = v.norm();
        if m < self.min_mod {
            self.min_mod = m;
            self.min_at = z;
        }
        self.max_mod = self.max_mod.max(m);
        if m == 0.0 {
            return Err(Error::ContourThroughZero { at: z, modulus: 0.0 });
        }
        Ok(v)
    }

    /// Continuous argument increment of `f` from `a` to `b`.
    fn track(&mut self, a: C64, b: C64, fa: C64, fb: C64, depth: u32) -> Result<f64> {
        let d = (fb / fa).arg();
        let m = 0.5 * (a + b);
        let fm = self.eval(m)?;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        if d.abs() < MAX_ARG_STEP && d1.abs() < MAX_ARG_STEP && d2.abs() < MAX_ARG_STEP && (d1 + d2 - d).abs() < 1e-9 {
            return Ok(d);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::ContourThroughZero {
                at: m,
                modulus: fm.norm(),
            });
        }
        Ok(self.track(a, m, fa, fm, depth + 1)? + self.track(m, b, fm, fb, depth + 1)?)
    }
}

/// Number of zeros of `f` inside `rect`, from the total change of `arg f`
/// along the boundary.
///
/// The boundary is sampled with `nodes_per_side` points per side and refined
/// adaptively until every argument step is small and self-consistent under
/// bisection. Only `arg f` is used, so `f` may be multiplied by any positive
/// function (e.g. rescaled by `e^{-|Im λ|}`) without changing the count.
pub fn count_zeros<F>(f: F, rect: Rect, nodes_per_side: usize) -> Result<i64>
where
    F: Fn(C64) -> C64,
{
    if !(rect.re1 > rect.re0 && rect.im1 > rect.im0) {
        return Err(Error::InvalidInput("degenerate rectangle".into()));
    }
    let n = nodes_per_side.max(2);
    let mut tr = Tracker {
        f: &f,
        min_mod: f64::INFINITY,
        min_at: C64::new(0.0, 0.0),
        max_mod: 0.0,
    };
    let corners = rect.corners();
    let mut total = 0.0;
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        let mut prev = a;
        let mut fprev = tr.eval(a)?;
        for k in 1..=n {
            let z = a + (b - a) * (k as f64 / n as f64);
            let fz = tr.eval(z)?;
            total += tr.track(prev, z, fprev, fz, 0)?;
            prev = z;
            fprev = fz;
        }
    }
    if tr.min_mod < MIN_MODULUS_RATIO * tr.max_mod {
        return Err(Error::ContourThroughZero {
            at: tr.min_at,
            modulus: tr.min_mod,
        });
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Rectangles of width at most `min_width` containing the zeros of `f`,
/// with their multiplicities, found by recursive splitting.
pub fn locate_zeros<F>(f: &F, rect: Rect, nodes_per_side: usize, min_width: f64) -> Result<Vec<(Rect, i64)>>
where
    F: Fn(C64) -> C64,
{
    let count = count_zeros(f, rect, nodes_per_side)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if rect.width() <= min_width {
        return Ok(vec![(rect, count)]);
    }
    let (a, b) = rect.split();
    let mut out = locate_zeros(f, a, nodes_per_side, min_width)?;
    out.extend(locate_zeros(f, b, nodes_per_side, min_width)?);
    Ok(out)
}
