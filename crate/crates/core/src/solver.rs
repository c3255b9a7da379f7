//! Evaluation of the contour-integral solution
//!
//! ```text
//! q(x,t) = 1/2π [ ∫_ℝ e^{iλx-λ²t} q̂0 dλ
//!               - ∫_{∂D_R⁺} e^{iλx-λ²t} (ζ⁺ + H)/Δ dλ
//!               - ∫_{∂D_R⁻} e^{iλx-λ²t} (e^{-iλ}ζ⁻ + H)/Δ dλ ]
//! ```
//!
//! plus boundary functionals, residual diagnostics and radius certification.
//!
//! Two routes are available. The *sector route* integrates over `∂D_R±`
//! as written; it needs `0 < x < 1` and converges like `e^{-x|λ|/√2}`
//! (upper) and `e^{-(1-x)|λ|/√2}` (lower). The *strip route* moves the
//! integrals onto the horizontal lines `Im λ = ±R/√2` (legitimate once the
//! region in between is certified zero-free), where `e^{-λ²t}` supplies
//! Gaussian decay for every `x ∈ [0,1]`. It takes `τ = t` and drops the part
//! of the data transform that has no Gaussian factor; that part integrates to
//! zero over `∂D_R±`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contours::{
    build_dminus, build_dplus, build_gamma, build_realline, count_zeros, ContourSpec, QuadContour, Rect,
    MAX_TRUNCATION,
};
use crate::error::{Error, Result};
use crate::kernel::Scaled;
use crate::transforms::{
    delta_scaled, fourier_q0_scaled, time_transform_scaled, weight_moment_scaled, zeta_minus_scaled,
    zeta_plus_scaled, SpaceSignal, TimeSignal,
};
use crate::weights::{Weight, ZeroBound};

/// Candidate radii tried, in order, before falling back to the analytic bound.
const RADIUS_LADDER: [f64; 19] = [
    1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 192.0, 256.0, 384.0, 512.0,
];
const CENSUS_NODES: usize = 32;
/// `arg Δ` turns by at most about one radian per unit length along a
/// horizontal edge; sample well above that so no turn is missed.
const CENSUS_NODES_PER_UNIT: f64 = 4.0;

/// The initial-nonlocal problem: heat equation on `(0,1)×(0,T]`,
/// `q(x,0) = q0`, `q_x(1,t) = g1`, `∫ K q dx = g0`.
#[derive(Debug)]
pub struct HeatProblem {
    pub q0: SpaceSignal,
    pub g0: TimeSignal,
    pub g1: TimeSignal,
    pub weight: Weight,
    pub horizon: f64,
    bound: Option<ZeroBound>,
    strip_bound: f64,
    certified: Mutex<Vec<(f64, f64)>>,
}

impl Clone for HeatProblem {
    fn clone(&self) -> Self {
        HeatProblem {
            q0: self.q0.clone(),
            g0: self.g0.clone(),
            g1: self.g1.clone(),
            weight: self.weight.clone(),
            horizon: self.horizon,
            bound: self.bound,
            strip_bound: self.strip_bound,
            certified: Mutex::new(self.certified.lock().unwrap().clone()),
        }
    }
}

impl HeatProblem {
    /// Validates the data. Atom-free weights must satisfy the zero-bound
    /// hypotheses; atomic weights must put nonzero mass at their leftmost atom,
    /// below 1.
    pub fn new(q0: SpaceSignal, g0: TimeSignal, g1: TimeSignal, weight: Weight, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        for (name, g) in [("g0", &g0), ("g1", &g1)] {
            if g.horizon() < horizon * (1.0 - 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "{name} is defined up to {} but the horizon is {horizon}",
                    g.horizon()
                )));
            }
        }
        let (bound, strip_bound) = if weight.has_atoms() {
            if !weight.density().is_zero() {
                return Err(Error::Unsupported("weights mixing a density with point atoms".into()));
            }
            (None, atomic_strip_bound(weight.atoms())?)
        } else {
            let zb = weight.zero_bound()?;
            (Some(zb), zb.m)
        };
        Ok(HeatProblem {
            q0,
            g0,
            g1,
            weight,
            horizon,
            bound,
            strip_bound,
            certified: Mutex::new(Vec::new()),
        })
    }

    pub fn zero_bound(&self) -> Option<&ZeroBound> {
        self.bound.as_ref()
    }

    /// All zeros of `Δ` satisfy `|Im λ| < strip_bound()`.
    pub fn strip_bound(&self) -> f64 {
        self.strip_bound
    }

    /// Radius from the analytic bound, if one applies.
    pub fn analytic_radius(&self) -> Option<f64> {
        self.bound.map(|b| b.r)
    }

    /// Zeros of `Δ` in `[-w, w] × [h_low, M]` with `h_low` just under `R/√2`.
    ///
    /// That box contains the part of `D_R⁺` below `Im λ = M`, and the region
    /// between `∂D_R⁺` and the line `Im λ = R/√2` up to `|Re λ| = w`.
    /// `Δ` is even with real Taylor coefficients, so the lower half-plane
    /// mirrors the upper.
    pub fn census(&self, radius: f64, width: f64) -> Result<i64> {
        census(&self.weight, radius, self.strip_bound, width)
    }

    /// Ok when `radius` is at least the analytic bound or a census finds no
    /// zeros. Successful censuses are cached.
    pub fn check_radius(&self, radius: f64, width: f64) -> Result<()> {
        if let Some(r) = self.analytic_radius() {
            if radius >= r {
                return Ok(());
            }
        }
        {
            let cache = self.certified.lock().unwrap();
            if cache.iter().any(|&(r, w)| r == radius && w >= width) {
                return Ok(());
            }
        }
        let n = self.census(radius, width)?;
        if n != 0 {
            let suggested = self
                .auto_radius(width)
                .unwrap_or_else(|_| self.analytic_radius().unwrap_or(f64::INFINITY));
            return Err(Error::PoleRisk { radius, suggested });
        }
        self.certified.lock().unwrap().push((radius, width));
        Ok(())
    }

    /// Smallest radius on a fixed ladder certified zero-free, capped by the
    /// analytic bound.
    pub fn auto_radius(&self, width: f64) -> Result<f64> {
        let analytic = self.analytic_radius();
        for &r in RADIUS_LADDER.iter() {
            if let Some(l) = analytic {
                if r >= l {
                    return Ok(l);
                }
            }
            if let Ok(0) = self.census(r, width) {
                self.certified.lock().unwrap().push((r, width));
                return Ok(r);
            }
        }
        analytic.ok_or(Error::PoleRisk {
            radius: *RADIUS_LADDER.last().unwrap(),
            suggested: f64::INFINITY,
        })
    }

    /// Same problem with every datum multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<HeatProblem> {
        HeatProblem::new(
            SpaceSignal::from_poly(self.q0.scaled(s))?,
            TimeSignal::from_poly(self.g0.scaled(s))?,
            TimeSignal::from_poly(self.g1.scaled(s))?,
            self.weight.clone(),
            self.horizon,
        )
    }

    /// Same weight and horizon, data summed.
    pub fn plus(&self, other: &HeatProblem) -> Result<HeatProblem> {
        HeatProblem::new(
            SpaceSignal::from_poly(self.q0.add(&other.q0))?,
            TimeSignal::from_poly(self.g0.add(&other.g0))?,
            TimeSignal::from_poly(self.g1.add(&other.g1))?,
            self.weight.clone(),
            self.horizon,
        )
    }
}

/// Strip bound for `Δ = Σ b_j cos([1-y_j]λ)`: the leftmost atom dominates
/// once `|b_0| sinh((1-y_0)v) > Σ_{j>0} |b_j| e^{(1-y_1)v}`.
fn atomic_strip_bound(atoms: &[(f64, f64)]) -> Result<f64> {
    let live: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.1 != 0.0).collect();
    let (y0, b0) = *live
        .first()
        .ok_or_else(|| Error::Hypothesis("all atom masses vanish".into()))?;
    if y0 >= 1.0 {
        return Err(Error::Hypothesis("leftmost atom sits at x = 1".into()));
    }
    let rest: f64 = live[1..].iter().map(|a| a.1.abs()).sum();
    // sinh(w) ≥ e^w (1 - e^{-2})/2 for w ≥ 1
    let base = 1.0 / (1.0 - y0);
    if rest == 0.0 {
        return Ok(base);
    }
    let y1 = live[1].0;
    let c = 0.5 * (1.0 - (-2.0f64).exp());
    Ok(base.max((rest / (c * b0.abs())).ln() / (y1 - y0)) * 1.01)
}

fn census(weight: &Weight, radius: f64, top: f64, width: f64) -> Result<i64> {
    let f = |l: C64| delta_scaled(weight, l).m;
    let mut last_err = None;
    for shrink in [0.95, 0.9, 0.85, 0.8] {
        let low = shrink * radius / SQRT_2;
        if low >= top {
            return Ok(0);
        }
        let w = width.max(top) * 1.0001;
        let nodes = CENSUS_NODES.max((CENSUS_NODES_PER_UNIT * 2.0 * w).ceil() as usize);
        match count_zeros(f, Rect::new(-w, w, low, top), nodes) {
            Ok(n) => return Ok(n),
            Err(e @ Error::ContourThroughZero { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Choice of `τ ∈ [t, T]` in `H(λ; g0, g1, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauRule {
    /// One `τ` shared by the whole grid.
    Fixed(f64),
    /// `τ = t` at each time.
    PerPoint,
}

/// Complex solution values on a grid, stored row-major with `x` outer.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<C64>,
    /// Summed magnitude of the outermost panels per point.
    pub trunc_est: Vec<f64>,
    /// `None` for fields produced by the oracles.
    pub tau: Option<TauRule>,
    pub contour_spec: Option<ContourSpec>,
}

impl SolutionField {
    pub fn at(&self, ix: usize, it: usize) -> C64 {
        self.values[ix * self.ts.len() + it]
    }

    pub fn sup_distance(&self, other: &SolutionField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// Per-node data for one sector contour: `ρ = numerator/Δ` for the
/// initial-datum part and `a0 = iλe^{-iλ}/Δ`, `a1 = ∫K e^{-iλy}/Δ` so that
/// `H/Δ = a0·T0(τ) + a1·T1(τ)`.
struct NodeData {
    lambda: C64,
    weight: C64,
    rho: C64,
    a0: C64,
    a1: C64,
}

fn node_data(problem: &HeatProblem, contour: &QuadContour, upper: bool) -> Vec<NodeData> {
    let k = &problem.weight;
    contour
        .nodes
        .par_iter()
        .zip(contour.weights.par_iter())
        .map(|(&lambda, &weight)| {
            let il = C64::i() * lambda;
            let d = delta_scaled(k, lambda);
            let num = if upper {
                zeta_plus_scaled(k, &problem.q0, lambda)
            } else {
                Scaled::exp(-il) * zeta_minus_scaled(k, &problem.q0, lambda)
            };
            NodeData {
                lambda,
                weight,
                rho: num.ratio(d),
                a0: (Scaled::exp(-il) * il).ratio(d),
                a1: weight_moment_scaled(k, -il).ratio(d),
            }
        })
        .collect()
}

/// `e^{-λ²t}(ρ + a0 T0 + a1 T1)` with the time transforms taken at `τ`.
/// With `strip` set, `τ = t` and the part of `e^{-λ²t} T(t)` carrying no
/// Gaussian factor is removed (see [`local_part`]).
fn time_factor(problem: &HeatProblem, n: &NodeData, t: f64, tau: f64, strip: bool) -> C64 {
    let mu = n.lambda * n.lambda;
    let et = Scaled::exp(-mu * t);
    let mut v = et.to_c64() * n.rho;
    for (g, a) in [(&problem.g0, n.a0), (&problem.g1, n.a1)] {
        if a == C64::new(0.0, 0.0) || g.is_zero() {
            continue;
        }
        let mut tt = (et * time_transform_scaled(g, mu, tau)).to_c64();
        if strip {
            tt -= local_part(g, mu, t);
        }
        v += tt * a;
    }
    v
}

/// `Σ_k (-1)^k g^{(k)}(t⁻) / μ^{k+1}`: the terms of `∫_0^t e^{μ(s-t)} g(s) ds`
/// produced at `s = t`. Multiplied by `e^{iλx}/Δ` they are analytic and
/// decaying in `D_R±` for `0 < x < 1`, so their sector integrals vanish;
/// they do not decay on horizontal lines and are left out of the strip route.
fn local_part(g: &TimeSignal, mu: C64, t: f64) -> C64 {
    let mut p = g.pieces()[g.piece_index(t)].clone();
    let mut out = C64::new(0.0, 0.0);
    let mut pow = mu.inv();
    let mut sign = 1.0;
    while !p.is_zero() {
        out += sign * p.eval(t) * pow;
        p = p.derivative();
        pow /= mu;
        sign = -sign;
    }
    out
}

fn log_tol(spec: &ContourSpec) -> f64 {
    (1.0 / spec.tail_tolerance).ln()
}

fn cap(spec: &ContourSpec) -> f64 {
    spec.max_abs_lambda.min(MAX_TRUNCATION)
}

/// Truncation lengths for the sector route: (upper rays, lower rays, real line).
pub fn sector_truncations(spec: &ContourSpec, x_min: f64, x_max: f64, t_min: f64) -> (f64, f64, f64) {
    let l = log_tol(spec) + 2.0;
    let up = (SQRT_2 * l / x_min).min(cap(spec));
    let down = (SQRT_2 * l / (1.0 - x_max)).min(cap(spec));
    let real = (l / t_min).sqrt().min(cap(spec));
    (up, down, real)
}

/// Truncation of the strip lines and the real line for times `≥ t_min`.
pub fn strip_truncation(spec: &ContourSpec, t_min: f64) -> f64 {
    let h = spec.radius / SQRT_2;
    let l = log_tol(spec) + 4.0;
    (h * h + l / t_min).sqrt().min(cap(spec))
}

fn check_grid(problem: &HeatProblem, xs: &[f64], ts: &[f64], open_x: bool) -> Result<()> {
    if xs.is_empty() || ts.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    for &x in xs {
        let ok = if open_x { x > 0.0 && x < 1.0 } else { (0.0..=1.0).contains(&x) };
        if !ok {
            return Err(Error::Domain(format!(
                "x = {x}; the sector route needs 0 < x < 1, use the boundary operations at the endpoints"
            )));
        }
    }
    for &t in ts {
        if !(t >= 0.0 && t <= problem.horizon * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", problem.horizon)));
        }
    }
    Ok(())
}

fn fold_range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Accumulate `Σ_nodes w e^{iλx} F(λ,t)` into `out[ix*nt + it]`, with the
/// outermost panels also summed into `tail`.
fn accumulate(
    contour: &QuadContour,
    xs: &[f64],
    factors: &[Vec<C64>],
    sign: f64,
    out: &mut [C64],
    tail: &mut [f64],
    lambdas: &[C64],
    weights: &[C64],
) {
    let nt = factors.first().map_or(0, Vec::len);
    let order = contour.panel_order;
    let rows: Vec<(Vec<C64>, Vec<f64>)> = xs
        .par_iter()
        .map(|&x| {
            let mut row = vec![C64::new(0.0, 0.0); nt];
            let mut tail_row = vec![0.0; nt];
            let mut panel = vec![C64::new(0.0, 0.0); nt];
            for (p, chunk) in factors.chunks(order).enumerate() {
                panel.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                for (j, f) in chunk.iter().enumerate() {
                    let idx = p * order + j;
                    let ex = weights[idx] * (C64::i() * lambdas[idx] * x).exp();
                    for (pv, fv) in panel.iter_mut().zip(f) {
                        *pv += ex * fv;
                    }
                }
                let is_tail = contour.tail_panels.contains(&p);
                for it in 0..nt {
                    row[it] += panel[it];
                    if is_tail {
                        tail_row[it] += panel[it].norm();
                    }
                }
            }
            (row, tail_row)
        })
        .collect();
    for (ix, (row, tail_row)) in rows.into_iter().enumerate() {
        for it in 0..nt {
            out[ix * nt + it] += sign * row[it] / (2.0 * PI);
            tail[ix * nt + it] += tail_row[it] / (2.0 * PI);
        }
    }
}

fn tau_for(rule: TauRule, t: f64) -> f64 {
    match rule {
        TauRule::Fixed(tau) => tau,
        TauRule::PerPoint => t,
    }
}

/// Default shared `τ = min(2·max t, T)`.
pub fn default_tau(problem: &HeatProblem, ts: &[f64]) -> f64 {
    let tmax = fold_range(ts).1;
    (2.0 * tmax).min(problem.horizon)
}

/// Grid evaluation by the sector route with the default `τ`.
pub fn evaluate_grid(problem: &HeatProblem, xs: &[f64], ts: &[f64], spec: &ContourSpec) -> Result<SolutionField> {
    evaluate_grid_with(problem, xs, ts, spec, TauRule::Fixed(default_tau(problem, ts)))
}

/// Grid evaluation by the sector route. `t = 0` columns return `q0`.
pub fn evaluate_grid_with(
    problem: &HeatProblem,
    xs: &[f64],
    ts: &[f64],
    spec: &ContourSpec,
    tau: TauRule,
) -> Result<SolutionField> {
    spec.validate()?;
    check_grid(problem, xs, ts, true)?;
    let positive: Vec<f64> = ts.iter().copied().filter(|&t| t > 0.0).collect();
    if let TauRule::Fixed(tau) = tau {
        let tmax = fold_range(&positive).1;
        if !positive.is_empty() && (tau < tmax * (1.0 - 1e-12) || tau > problem.horizon * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!("τ = {tau} must lie in [max t, T]")));
        }
    }
    let nt = ts.len();
    let mut values = vec![C64::new(0.0, 0.0); xs.len() * nt];
    let mut tail = vec![0.0; xs.len() * nt];
    if !positive.is_empty() {
        problem.check_radius(spec.radius, problem.strip_bound)?;
        let (x_min, x_max) = fold_range(xs);
        let (t_min, t_max) = fold_range(&positive);
        let (r_up, r_down, r_real) = sector_truncations(spec, x_min, x_max, t_min);
        let base = ContourSpec {
            chirp_time: t_max,
            ..*spec
        };
        // time factors are zero for t = 0 columns; those are overwritten below
        let t_eff: Vec<f64> = ts.to_vec();
        for (upper, r) in [(true, r_up), (false, r_down)] {
            let contour = if upper {
                build_dplus(&base.with_truncation(r))
            } else {
                build_dminus(&base.with_truncation(r))
            };
            let nodes = node_data(problem, &contour, upper);
            let factors: Vec<Vec<C64>> = nodes
                .par_iter()
                .map(|n| {
                    t_eff
                        .iter()
                        .map(|&t| if t > 0.0 { time_factor(problem, n, t, tau_for(tau, t), false) } else { C64::new(0.0, 0.0) })
                        .collect()
                })
                .collect();
            let lambdas: Vec<C64> = nodes.iter().map(|n| n.lambda).collect();
            let weights: Vec<C64> = nodes.iter().map(|n| n.weight).collect();
            accumulate(&contour, xs, &factors, -1.0, &mut values, &mut tail, &lambdas, &weights);
        }
        let real = build_realline(&base.with_truncation(r_real));
        real_line_term(problem, &real, xs, &t_eff, |_| C64::new(1.0, 0.0), &mut values, &mut tail);
    }
    for (it, &t) in ts.iter().enumerate() {
        if t == 0.0 {
            for (ix, &x) in xs.iter().enumerate() {
                values[ix * nt + it] = C64::new(problem.q0.eval_mid(x), 0.0);
                tail[ix * nt + it] = 0.0;
            }
        }
    }
    Ok(SolutionField {
        xs: xs.to_vec(),
        ts: ts.to_vec(),
        values,
        trunc_est: tail,
        tau: Some(tau),
        contour_spec: Some(*spec),
    })
}

/// `1/2π ∫_ℝ e^{iλx - λ²t} m(λ) q̂0(λ) dλ` accumulated into the grid.
fn real_line_term(
    problem: &HeatProblem,
    contour: &QuadContour,
    xs: &[f64],
    ts: &[f64],
    multiplier: impl Fn(C64) -> C64 + Sync,
    values: &mut [C64],
    tail: &mut [f64],
) {
    let factors: Vec<Vec<C64>> = contour
        .nodes
        .par_iter()
        .map(|&l| {
            let qh = fourier_q0_scaled(&problem.q0, l).to_c64() * multiplier(l);
            ts.iter()
                .map(|&t| if t > 0.0 { (-l * l * t).exp() * qh } else { C64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    accumulate(contour, xs, &factors, 1.0, values, tail, &contour.nodes, &contour.weights);
}

/// `q(x,t)` at one point by the sector route.
pub fn evaluate(problem: &HeatProblem, x: f64, t: f64, tau: f64, spec: &ContourSpec) -> Result<C64> {
    if !(tau >= t && tau <= problem.horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!("τ = {tau} must lie in [t, T] = [{t}, {}]", problem.horizon)));
    }
    let field = evaluate_grid_with(problem, &[x], &[t], spec, TauRule::Fixed(tau))?;
    Ok(field.values[0])
}

/// A spatial functional `q ↦ ∫ e^{iλx} dν(x)`-type evaluated through its
/// spectral multiplier `m(λ)`: point values use `e^{iλx}`, the flux at 1 uses
/// `iλ e^{iλ}`, weighted averages use `∫ K(x) e^{iλx} dx`.
fn strip_functional<M>(problem: &HeatProblem, ts: &[f64], spec: &ContourSpec, m: M) -> Result<Vec<C64>>
where
    M: Fn(C64) -> C64 + Sync,
{
    spec.validate()?;
    if ts.iter().any(|&t| !(t > 0.0 && t <= problem.horizon * (1.0 + 1e-12))) {
        return Err(Error::Domain("strip evaluation needs 0 < t ≤ T".into()));
    }
    let (t_min, t_max) = fold_range(ts);
    let a_max = strip_truncation(spec, t_min);
    problem.check_radius(spec.radius, a_max)?;
    let base = ContourSpec {
        chirp_time: t_max,
        ..*spec
    };
    let mut out = vec![C64::new(0.0, 0.0); ts.len()];
    for upper in [true, false] {
        let contour = build_gamma(&base.with_truncation(a_max), if upper { 1 } else { -1 });
        let nodes = node_data(problem, &contour, upper);
        let sums: Vec<Vec<C64>> = nodes
            .par_iter()
            .map(|n| {
                let mw = m(n.lambda) * n.weight;
                ts.iter().map(|&t| mw * time_factor(problem, n, t, t, true)).collect()
            })
            .collect();
        for s in sums {
            for (o, v) in out.iter_mut().zip(s) {
                *o -= v / (2.0 * PI);
            }
        }
    }
    let real = build_realline(&base.with_truncation(a_max));
    let sums: Vec<Vec<C64>> = real
        .nodes
        .par_iter()
        .zip(real.weights.par_iter())
        .map(|(&l, &w)| {
            let qh = fourier_q0_scaled(&problem.q0, l).to_c64() * m(l) * w;
            ts.iter().map(|&t| (-l * l * t).exp() * qh).collect()
        })
        .collect();
    for s in sums {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v / (2.0 * PI);
        }
    }
    if out.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite {
            node: C64::new(0.0, spec.radius / SQRT_2),
        });
    }
    Ok(out)
}

/// `q(x,t)` for `x ∈ [0,1]` by the strip route (with `τ = t`).
pub fn evaluate_strip(problem: &HeatProblem, x: f64, ts: &[f64], spec: &ContourSpec) -> Result<Vec<C64>> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0,1]")));
    }
    strip_functional(problem, ts, spec, |l| (C64::i() * l * x).exp())
}

/// `q_x(1,t)` by the strip route: the integrands carry an extra `iλ` and are
/// evaluated at `x = 1` directly. `τ = t` is used (always admissible); the
/// `tau` argument is only validated.
pub fn flux_at_one(problem: &HeatProblem, t: f64, tau: f64, spec: &ContourSpec) -> Result<C64> {
    if !(tau >= t && tau <= problem.horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!("τ = {tau} must lie in [t, T]")));
    }
    Ok(flux_at_one_many(problem, &[t], spec)?[0])
}

pub fn flux_at_one_many(problem: &HeatProblem, ts: &[f64], spec: &ContourSpec) -> Result<Vec<C64>> {
    strip_functional(problem, ts, spec, |l| C64::i() * l * (C64::i() * l).exp())
}

/// `∫_0^1 K(x) q(x,t) dx` by the strip route, with the `x`-integral done in
/// closed form inside the spectral integrand.
pub fn weighted_average(problem: &HeatProblem, ts: &[f64], spec: &ContourSpec) -> Result<Vec<C64>> {
    let k = problem.weight.clone();
    strip_functional(problem, ts, spec, move |l| weight_moment_scaled(&k, C64::i() * l).to_c64())
}

/// Sector-route `q_x(1-ε, t)` extrapolated to `ε → 0` over
/// `ε ∈ {10⁻², 5·10⁻³, 2.5·10⁻³}`. Much more expensive than [`flux_at_one`]
/// because the lower rays decay only like `e^{-ε|λ|/√2}`.
pub fn flux_at_one_extrapolated(problem: &HeatProblem, t: f64, tau: f64, spec: &ContourSpec) -> Result<C64> {
    let eps = [1e-2, 5e-3, 2.5e-3];
    let mut vals = Vec::new();
    for e in eps {
        vals.push(sector_derivative(problem, 1.0 - e, t, tau, spec)?);
    }
    Ok(richardson3(vals[0], vals[1], vals[2]))
}

/// `q_x(x,t)` by the sector route.
fn sector_derivative(problem: &HeatProblem, x: f64, t: f64, tau: f64, spec: &ContourSpec) -> Result<C64> {
    spec.validate()?;
    check_grid(problem, &[x], &[t], true)?;
    problem.check_radius(spec.radius, problem.strip_bound)?;
    let (r_up, r_down, r_real) = sector_truncations(spec, x, x, t);
    let base = ContourSpec { chirp_time: t, ..*spec };
    let mut total = C64::new(0.0, 0.0);
    for (upper, r) in [(true, r_up), (false, r_down)] {
        let contour = if upper {
            build_dplus(&base.with_truncation(r))
        } else {
            build_dminus(&base.with_truncation(r))
        };
        let nodes = node_data(problem, &contour, upper);
        let s: C64 = nodes
            .iter()
            .map(|n| n.weight * C64::i() * n.lambda * (C64::i() * n.lambda * x).exp() * time_factor(problem, n, t, tau, false))
            .sum();
        total -= s;
    }
    let real = build_realline(&base.with_truncation(r_real));
    let s: C64 = real
        .nodes
        .iter()
        .zip(&real.weights)
        .map(|(&l, &w)| w * C64::i() * l * (C64::i() * l * x - l * l * t).exp() * fourier_q0_scaled(&problem.q0, l).to_c64())
        .sum();
    Ok((total + s) / (2.0 * PI))
}

/// Extrapolation of `f(h)`, `f(h/2)`, `f(h/4)` to `h → 0` removing `O(h)` and `O(h²)`.
pub fn richardson3(f1: C64, f2: C64, f4: C64) -> C64 {
    (8.0 * f4 - 6.0 * f2 + f1) / 3.0
}

/// A boundary value with an optional accuracy warning.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValue {
    pub value: C64,
    pub warning: Option<String>,
}

/// `γ(t) = q(0,t)`, evaluated at `x = 0` by the strip route.
pub fn boundary_value_gamma(problem: &HeatProblem, t: f64, spec: &ContourSpec) -> Result<BoundaryValue> {
    let v = evaluate_strip(problem, 0.0, &[t], spec)?[0];
    Ok(BoundaryValue { value: v, warning: None })
}

/// `γ(t)` by sector-route evaluation at `x ∈ {0.02, 0.01, 0.005}` and
/// extrapolation to `x → 0`. A warning is attached when the successive
/// differences fail to contract.
pub fn boundary_value_gamma_extrapolated(problem: &HeatProblem, t: f64, spec: &ContourSpec) -> Result<BoundaryValue> {
    let xs = [0.02, 0.01, 0.005];
    let tau = default_tau(problem, &[t]);
    let field = evaluate_grid_with(problem, &xs, &[t], spec, TauRule::Fixed(tau))?;
    let (a, b, c) = (field.values[0], field.values[1], field.values[2]);
    let value = richardson3(a, b, c);
    let d1 = (a - b).norm();
    let d2 = (b - c).norm();
    let warning = if d2 > 0.75 * d1 && d2 > 1e-12 {
        Some(format!("extrapolation not contracting: |q(0.02)-q(0.01)| = {d1:.3e}, |q(0.01)-q(0.005)| = {d2:.3e}"))
    } else {
        None
    };
    Ok(BoundaryValue { value, warning })
}

/// Sup-norm residuals of the differential equation and the three side
/// conditions, and the dependence on `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub pde_residual_sup: f64,
    pub ic_residual_sup: f64,
    pub bc_residual_sup: f64,
    pub nc_residual_sup: f64,
    pub tau_independence: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.pde_residual_sup
            .max(self.ic_residual_sup)
            .max(self.bc_residual_sup)
            .max(self.nc_residual_sup)
            .max(self.tau_independence)
    }
}

/// Step sizes for the residual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualOptions {
    /// Spatial step of the 5-point stencils.
    pub h_x: f64,
    /// Temporal step of the 5-point stencils (reduced to `t/4` near `t = 0`).
    pub h_t: f64,
    /// Largest of the three small times `s, s/2, s/4` extrapolated to `t = 0`.
    pub ic_time: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            h_x: 0.01,
            h_t: 0.001,
            ic_time: 1e-4,
        }
    }
}

/// Residual diagnostics for a field computed on `x ∈ (0,1)`, `t > 0`.
pub fn residuals(problem: &HeatProblem, field: &SolutionField, spec: &ContourSpec) -> Result<ResidualReport> {
    residuals_with(problem, field, spec, &ResidualOptions::default())
}

pub fn residuals_with(
    problem: &HeatProblem,
    field: &SolutionField,
    spec: &ContourSpec,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let xs = &field.xs;
    let ts: Vec<f64> = field.ts.iter().copied().filter(|&t| t > 0.0).collect();
    if ts.is_empty() {
        return Err(Error::InvalidInput("residuals need at least one positive time".into()));
    }
    // (a) q_t - q_xx with 4th-order central differences
    let hx = opts.h_x.min(0.25 * xs.iter().map(|&x| x.min(1.0 - x)).fold(f64::INFINITY, f64::min));
    let mut sx: Vec<f64> = Vec::new();
    for &x in xs {
        for k in -2..=2 {
            sx.push(x + k as f64 * hx);
        }
    }
    let mut st: Vec<f64> = Vec::new();
    let mut ht = Vec::new();
    for &t in &ts {
        let h = opts.h_t.min(0.25 * t).min(0.5 * (problem.horizon - t).max(0.0));
        let h = if h <= 0.0 { opts.h_t.min(0.25 * t) } else { h };
        ht.push(h);
        for k in -2..=2 {
            st.push(t + k as f64 * h);
        }
    }
    // centred stencils need t + 2h ≤ T; fall back to a one-sided-free shift
    let horizon = problem.horizon;
    let st_clamped: Vec<f64> = st.iter().map(|&t| t.min(horizon)).collect();
    let tau = TauRule::Fixed(default_tau(problem, &st_clamped));
    let stencil = evaluate_grid_with(problem, &sx, &st_clamped, spec, tau)?;
    let nst = st_clamped.len();
    let get = |ixs: usize, its: usize| stencil.values[ixs * nst + its];
    let mut pde: f64 = 0.0;
    for ix in 0..xs.len() {
        for (it, &h) in ht.iter().enumerate() {
            let cx = ix * 5 + 2;
            let ct = it * 5 + 2;
            if st[ct + 2] > horizon * (1.0 + 1e-12) {
                continue;
            }
            let q_t = (get(cx, ct - 2) - 8.0 * get(cx, ct - 1) + 8.0 * get(cx, ct + 1) - get(cx, ct + 2)) / (12.0 * h);
            let q_xx = (-get(cx - 2, ct) + 16.0 * get(cx - 1, ct) - 30.0 * get(cx, ct) + 16.0 * get(cx + 1, ct)
                - get(cx + 2, ct))
                / (12.0 * hx * hx);
            pde = pde.max((q_t - q_xx).norm());
        }
    }
    // (b) initial condition by extrapolation from three small times
    let s = opts.ic_time;
    let ic_field = evaluate_grid_with(problem, xs, &[s, 0.5 * s, 0.25 * s], spec, TauRule::Fixed(s))?;
    let mut ic: f64 = 0.0;
    for (ix, &x) in xs.iter().enumerate() {
        let v = richardson3(ic_field.at(ix, 0), ic_field.at(ix, 1), ic_field.at(ix, 2));
        ic = ic.max((v - problem.q0.eval_mid(x)).norm());
    }
    // (c) flux at x = 1 and (d) weighted average
    let flux = flux_at_one_many(problem, &ts, spec)?;
    let bc = flux
        .iter()
        .zip(&ts)
        .map(|(f, &t)| (f - problem.g1.eval(t)).norm())
        .fold(0.0, f64::max);
    let avg = weighted_average(problem, &ts, spec)?;
    let nc = avg
        .iter()
        .zip(&ts)
        .map(|(a, &t)| (a - problem.g0.eval(t)).norm())
        .fold(0.0, f64::max);
    // (e) τ = t at each time against the shared default τ
    let f1 = evaluate_grid_with(problem, xs, &ts, spec, TauRule::PerPoint)?;
    let f2 = evaluate_grid_with(problem, xs, &ts, spec, TauRule::Fixed(default_tau(problem, &ts)))?;
    Ok(ResidualReport {
        pde_residual_sup: pde,
        ic_residual_sup: ic,
        bc_residual_sup: bc,
        nc_residual_sup: nc,
        tau_independence: f1.sup_distance(&f2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn spec() -> ContourSpec {
        ContourSpec::default()
    }

    fn steady(c: f64) -> HeatProblem {
        HeatProblem::new(
            SpaceSignal::constant(c),
            TimeSignal::constant(1.0, c),
            TimeSignal::zero(1.0),
            Weight::constant(1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = HeatProblem::new(
            SpaceSignal::zero(),
            TimeSignal::zero(1.0),
            TimeSignal::zero(1.0),
            Weight::constant(1.0),
            1.0,
        )
        .unwrap();
        let v = evaluate(&p, 0.3, 0.1, 0.2, &spec()).unwrap();
        assert_eq!(v, C64::new(0.0, 0.0));
    }

    #[test]
    fn steady_state_is_reproduced() {
        let p = steady(2.5);
        let f = evaluate_grid(&p, &[0.2, 0.5, 0.8], &[0.0, 0.05, 0.1], &spec()).unwrap();
        for v in &f.values {
            assert!((v - 2.5).norm() < 1e-9, "{v}");
        }
        let g = boundary_value_gamma(&p, 0.05, &spec()).unwrap();
        assert!((g.value - 2.5).norm() < 1e-9);
        let fl = flux_at_one(&p, 0.05, 0.05, &spec()).unwrap();
        assert!(fl.norm() < 1e-9);
    }

    #[test]
    fn grid_shapes() {
        let p = steady(1.0);
        for (nx, nt) in [(1, 1), (1, 3), (4, 2)] {
            let xs: Vec<f64> = (0..nx).map(|i| 0.2 + 0.15 * i as f64).collect();
            let ts: Vec<f64> = (0..nt).map(|i| 0.02 + 0.02 * i as f64).collect();
            let f = evaluate_grid(&p, &xs, &ts, &spec()).unwrap();
            assert_eq!(f.values.len(), nx * nt);
            assert_eq!(f.trunc_est.len(), nx * nt);
        }
    }

    #[test]
    fn boundary_points_are_rejected_by_sector_route() {
        let p = steady(1.0);
        assert!(matches!(evaluate(&p, 0.0, 0.1, 0.1, &spec()), Err(Error::Domain(_))));
        assert!(matches!(evaluate(&p, 1.0, 0.1, 0.1, &spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn radius_below_certified_region_is_refused() {
        // K ≡ 1 has zeros at ±π, ±2π, ... on the real axis only; R/√2 below
        // the line through them would still be fine, so force a failure with a
        // weight whose determinant has complex zeros: K = 1 + 8x on [0,1].
        let k = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![1.0, 8.0])]).unwrap();
        let p = HeatProblem::new(SpaceSignal::zero(), TimeSignal::zero(1.0), TimeSignal::zero(1.0), k, 1.0).unwrap();
        let analytic = p.analytic_radius().unwrap();
        let census_low = p.census(0.1, p.strip_bound()).unwrap();
        if census_low > 0 {
            let s = ContourSpec { radius: 0.1, ..spec() };
            assert!(matches!(
                evaluate(&p, 0.5, 0.1, 0.1, &s),
                Err(Error::PoleRisk { .. })
            ));
        }
        assert!(p.check_radius(analytic, p.strip_bound()).is_ok());
    }

    /// `u = x² + 2t` with `K = 1 - x/2`.
    fn quadratic() -> HeatProblem {
        let k = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![1.0, -0.5])]).unwrap();
        HeatProblem::new(
            SpaceSignal::poly(vec![0.0, 0.0, 1.0]),
            TimeSignal::poly(1.0, vec![5.0 / 24.0, 1.5]),
            TimeSignal::constant(1.0, 2.0),
            k,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn exact_polynomial_solution() {
        let p = quadratic();
        let ts = [0.02, 0.1];
        let f = evaluate_grid(&p, &[0.3, 0.7], &ts, &spec()).unwrap();
        for (ix, x) in f.xs.iter().enumerate() {
            for (it, t) in f.ts.iter().enumerate() {
                assert!((f.at(ix, it) - (x * x + 2.0 * t)).norm() < 1e-10);
            }
        }
        for x in [0.0, 0.5, 1.0] {
            let v = evaluate_strip(&p, x, &ts, &spec()).unwrap();
            for (v, t) in v.iter().zip(ts) {
                assert!((v - (x * x + 2.0 * t)).norm() < 1e-10);
            }
        }
        for (f, t) in flux_at_one_many(&p, &ts, &spec()).unwrap().iter().zip(ts) {
            assert!((f - 2.0).norm() < 1e-10, "{t}: {f}");
        }
        for (a, t) in weighted_average(&p, &ts, &spec()).unwrap().iter().zip(ts) {
            assert!((a - (5.0 / 24.0 + 1.5 * t)).norm() < 1e-10);
        }
    }

    #[test]
    fn per_point_tau_matches_shared_tau() {
        let p = quadratic();
        let xs = [0.2, 0.6];
        let ts = [0.01, 0.05];
        let a = evaluate_grid_with(&p, &xs, &ts, &spec(), TauRule::PerPoint).unwrap();
        let b = evaluate_grid(&p, &xs, &ts, &spec()).unwrap();
        assert!(a.sup_distance(&b) < 1e-10);
    }

    #[test]
    fn linearity() {
        let p = quadratic();
        let q = steady(1.0).scaled(0.5).unwrap();
        let q = HeatProblem::new(q.q0.clone(), q.g0.clone(), q.g1.clone(), p.weight.clone(), 1.0).unwrap();
        let sum = p.plus(&q).unwrap().scaled(2.0).unwrap();
        let xs = [0.4];
        let ts = [0.03];
        let lhs = evaluate_grid(&sum, &xs, &ts, &spec()).unwrap().values[0];
        let rhs = 2.0 * (evaluate_grid(&p, &xs, &ts, &spec()).unwrap().values[0]
            + evaluate_grid(&q, &xs, &ts, &spec()).unwrap().values[0]);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn atomic_strip_bound_covers_zeros() {
        // Δ = cos λ + 0.5 cos(0.5 λ): zeros are real
        let m = atomic_strip_bound(&[(0.0, 1.0), (0.5, 0.5)]).unwrap();
        assert!(m >= 1.0);
        let w = Weight::atomic(vec![(0.0, 1.0), (0.5, 0.5)]).unwrap();
        assert_eq!(census(&w, 1.0, m, 40.0).unwrap(), 0);
        assert!(matches!(atomic_strip_bound(&[(1.0, 1.0)]), Err(Error::Hypothesis(_))));
    }
}
