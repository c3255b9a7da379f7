//! Reference solvers independent of the spectral machinery: a finite
//! difference scheme for the nonlocal problem and an eigenfunction series for
//! the Dirichlet–Neumann problem.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contours::gauss_legendre;
use crate::error::{Error, Result};
use crate::kernel::exp_integral;
use crate::poly::PiecewisePoly;
use crate::solver::{HeatProblem, SolutionField};
use crate::transforms::{SpaceSignal, TimeSignal};
use crate::weights::Weight;

/// Crank–Nicolson settings. The first `rannacher_steps` steps are replaced by
/// two backward-Euler half steps each to damp rough initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    pub n_space: usize,
    pub dt: f64,
    pub rannacher_steps: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            n_space: 400,
            dt: 2.5e-4,
            rannacher_steps: 2,
        }
    }
}

impl FdConfig {
    pub fn refined(&self) -> FdConfig {
        FdConfig {
            n_space: 2 * self.n_space,
            dt: 0.5 * self.dt,
            rannacher_steps: 2 * self.rannacher_steps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub field: SolutionField,
    /// Euclidean size of the correction applied to the nodal initial data to
    /// satisfy the constraint at `t = 0`.
    pub projection: f64,
    /// Largest `|Σ c_i q_i - g0(t)|` over all steps.
    pub constraint_residual: f64,
}

/// `c_i = ∫ K φ_i` for the hat functions `φ_i` of a uniform grid; atoms are
/// shared between the two neighbouring nodes by linear interpolation.
pub fn constraint_weights(k: &Weight, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let mut c = vec![0.0; n + 1];
    let dens = k.density();
    let (gx, gw) = gauss_legendre(dens.max_degree() / 2 + 2);
    for i in 0..n {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        for (lo, hi, p) in dens.segments_within(a, b) {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in gx.iter().zip(&gw) {
                let y = mid + half * x;
                let kv = p.eval(y) * w * half;
                c[i] += kv * (b - y) / h;
                c[i + 1] += kv * (y - a) / h;
            }
        }
    }
    for &(y, m) in k.atoms() {
        let i = ((y / h).floor() as usize).min(n - 1);
        let s = (y - i as f64 * h) / h;
        c[i] += m * (1.0 - s);
        c[i + 1] += m * s;
    }
    c
}

/// Thomas algorithm for a tridiagonal system (sub, diag, sup); overwrites `rhs`.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        cp[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * cp[i - 1];
        rhs[i] = (rhs[i] - sub[i - 1] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= cp[i] * rhs[i + 1];
    }
}

/// One θ-step matrix for nodes `1..=N`, with the influence vector of `q_0`.
struct StepMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// `L⁻¹(-a e_1)`: response of the interior to a unit `q_0`.
    v: Vec<f64>,
    denom: f64,
}

impl StepMatrix {
    fn new(n: usize, dt: f64, theta: f64, c: &[f64]) -> Result<Self> {
        let r = theta * dt * (n * n) as f64;
        let mut sub = vec![-r; n - 1];
        let diag = vec![1.0 + 2.0 * r; n];
        let sup = vec![-r; n - 1];
        // ghost node: q_{N+1} = q_{N-1} + 2h g1
        sub[n - 2] = -2.0 * r;
        let mut v = vec![0.0; n];
        v[0] = r;
        thomas(&sub, &diag, &sup, &mut v);
        let denom = c[0] + c[1..].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let scale = c.iter().map(|x| x.abs()).sum::<f64>();
        if denom.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular("the constraint row is degenerate for this weight".into()));
        }
        Ok(StepMatrix { sub, diag, sup, v, denom })
    }
}

/// Method-of-lines solution on a uniform grid: centred second differences,
/// ghost-node Neumann closure at `x = 1`, the algebraic constraint
/// `Σ c_i q_i = g0(t)` in place of the equation at `x = 0`, and θ-stepping.
/// Values at `xs` are interpolated with local cubics.
pub fn fd_solve(problem: &HeatProblem, cfg: &FdConfig, xs: &[f64], ts: &[f64]) -> Result<FdSolution> {
    let n = cfg.n_space;
    if n < 16 {
        return Err(Error::InvalidInput("n_space must be at least 16".into()));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if ts.iter().any(|&t| !(t > 0.0 && t <= problem.horizon * (1.0 + 1e-12))) || ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be increasing within (0, T]".into()));
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Domain("x outside [0,1]".into()));
    }
    let h = 1.0 / n as f64;
    let c = constraint_weights(&problem.weight, n);
    let mut q: Vec<f64> = (0..=n).map(|i| problem.q0.eval_mid(i as f64 * h)).collect();
    let mismatch = problem.g0.eval(0.0) - dot(&c, &q);
    let cc = dot(&c, &c);
    let projection = (mismatch / cc.sqrt()).abs();
    for (qi, ci) in q.iter_mut().zip(&c) {
        *qi += mismatch * ci / cc;
    }

    let mut cache: Vec<(f64, f64, StepMatrix)> = Vec::new();
    let mut t = 0.0;
    let mut steps_done = 0usize;
    let mut worst: f64 = 0.0;
    let mut snapshots = Vec::with_capacity(ts.len());
    for &target in ts {
        let span = target - t;
        let m = if span > 0.0 { (span / cfg.dt).ceil().max(1.0) as usize } else { 0 };
        let dt = if m > 0 { span / m as f64 } else { 0.0 };
        for _ in 0..m {
            if steps_done < cfg.rannacher_steps {
                for _ in 0..2 {
                    step(problem, &c, &mut q, t, 0.5 * dt, 1.0, &mut cache)?;
                    t += 0.5 * dt;
                }
            } else {
                step(problem, &c, &mut q, t, dt, 0.5, &mut cache)?;
                t += dt;
            }
            steps_done += 1;
            worst = worst.max((dot(&c, &q) - problem.g0.eval(t)).abs());
        }
        t = target;
        snapshots.push(q.clone());
    }
    let mut values = vec![C64::new(0.0, 0.0); xs.len() * ts.len()];
    for (ix, &x) in xs.iter().enumerate() {
        for (it, snap) in snapshots.iter().enumerate() {
            values[ix * ts.len() + it] = C64::new(interp_cubic(snap, x), 0.0);
        }
    }
    Ok(FdSolution {
        field: SolutionField {
            xs: xs.to_vec(),
            ts: ts.to_vec(),
            values,
            trunc_est: vec![0.0; xs.len() * ts.len()],
            tau: None,
            contour_spec: None,
        },
        projection,
        constraint_residual: worst,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn step(
    problem: &HeatProblem,
    c: &[f64],
    q: &mut [f64],
    t: f64,
    dt: f64,
    theta: f64,
    cache: &mut Vec<(f64, f64, StepMatrix)>,
) -> Result<()> {
    let n = q.len() - 1;
    let idx = match cache.iter().position(|(d, th, _)| *d == dt && *th == theta) {
        Some(i) => i,
        None => {
            cache.push((dt, theta, StepMatrix::new(n, dt, theta, c)?));
            cache.len() - 1
        }
    };
    let mat = &cache[idx].2;
    let inv_h2 = (n * n) as f64;
    let e = (1.0 - theta) * dt * inv_h2;
    let t1 = t + dt;
    let flux = theta * problem.g1.eval(t1) + (1.0 - theta) * problem.g1.eval(t);
    let mut rhs = vec![0.0; n];
    for i in 1..n {
        rhs[i - 1] = q[i] + e * (q[i - 1] - 2.0 * q[i] + q[i + 1]);
    }
    rhs[n - 1] = q[n] + e * (2.0 * q[n - 1] - 2.0 * q[n]) + dt * 2.0 * n as f64 * flux;
    thomas(&mat.sub, &mat.diag, &mat.sup, &mut rhs);
    let q0 = (problem.g0.eval(t1) - dot(&c[1..], &rhs)) / mat.denom;
    q[0] = q0;
    for i in 0..n {
        q[i + 1] = rhs[i] + q0 * mat.v[i];
    }
    Ok(())
}

/// Four-point Lagrange interpolation on the uniform grid `i/N`.
fn interp_cubic(q: &[f64], x: f64) -> f64 {
    let n = q.len() - 1;
    let s = x * n as f64;
    let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 3) as usize;
    let mut out = 0.0;
    for j in 0..4 {
        let mut l = 1.0;
        for k in 0..4 {
            if k != j {
                l *= (s - (i0 + k) as f64) / (j as f64 - k as f64);
            }
        }
        out += l * q[i0 + j];
    }
    out
}

/// Eigenfunction series for `q_t = q_xx`, `q(0,t) = γ(t)`, `q_x(1,t) = g1(t)`:
///
/// `q = γ(t) + g1(t) x + Σ_n c_n(t) sin(κ_n x)`, `κ_n = (n + ½)π`,
///
/// with Duhamel integrals of the lifted forcing in closed form. Jumps of `γ`
/// or `g1` act as impulses. Terms are added until the tail bound falls
/// below `1e-8`.
pub fn series_solve_dirichlet(
    q0: &SpaceSignal,
    gamma: &TimeSignal,
    g1: &TimeSignal,
    xs: &[f64],
    ts: &[f64],
) -> Result<SolutionField> {
    let horizon = gamma.horizon().min(g1.horizon());
    if ts.iter().any(|&t| !(t > 0.0 && t <= horizon * (1.0 + 1e-12))) {
        return Err(Error::InvalidInput("times must lie in (0, T]".into()));
    }
    let dg = derivative(gamma);
    let dg1 = derivative(g1);
    let jumps_g = jumps(gamma);
    let jumps_g1 = jumps(g1);
    let forcing = dg.sup_abs() + dg1.sup_abs()
        + jumps_g.iter().chain(&jumps_g1).map(|j| j.1.abs()).sum::<f64>();
    let w0_bound = 2.0 * (q0.sup_abs() + gamma.eval(0.0).abs() + g1.eval(0.0).abs());
    let (g0v, g10v) = (gamma.eval(0.0), g1.eval(0.0));
    let mut values = vec![C64::new(0.0, 0.0); xs.len() * ts.len()];
    for (it, &t) in ts.iter().enumerate() {
        // initial part: e^{-κ²t} w0 ≤ 1e-10; forcing part: Σ_{k>n} 2F/κ_k³ ≈ F/(π³ n²)
        let n_init = ((23.0 / t).sqrt() / std::f64::consts::PI + 1.0) * (1.0 + w0_bound.ln().max(0.0) / 23.0);
        let n_force = (forcing / (std::f64::consts::PI.powi(3) * 1e-9)).sqrt();
        let n_max = (n_init.max(n_force).ceil() as usize).clamp(16, 2_000_000);
        let mut coeffs = Vec::with_capacity(n_max);
        for n in 0..n_max {
            let k = (n as f64 + 0.5) * std::f64::consts::PI;
            let k2 = k * k;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let ks = 2.0 / k;
            let kx = 2.0 * sign / k2;
            // 2∫ (q0 - γ(0) - g1(0) x) sin(κx) dx
            let w0 = 2.0 * exp_integral(q0, C64::new(0.0, k), 0.0, 1.0).to_c64().im - g0v * ks - g10v * kx;
            let mut c = (-k2 * t).exp() * w0;
            // -∫_0^t e^{-κ²(t-s)} [γ'(s) ks + g1'(s) kx] ds
            let duh = |d: &PiecewisePoly| exp_integral(d, C64::new(k2, 0.0), 0.0, t) * C64::new(1.0, 0.0);
            let dg_int = (duh(&dg) * crate::kernel::Scaled::exp(C64::new(-k2 * t, 0.0))).to_c64().re;
            let dg1_int = (duh(&dg1) * crate::kernel::Scaled::exp(C64::new(-k2 * t, 0.0))).to_c64().re;
            c -= dg_int * ks + dg1_int * kx;
            for &(s, jump) in &jumps_g {
                if s < t {
                    c -= (-k2 * (t - s)).exp() * jump * ks;
                }
            }
            for &(s, jump) in &jumps_g1 {
                if s < t {
                    c -= (-k2 * (t - s)).exp() * jump * kx;
                }
            }
            coeffs.push((k, c));
        }
        let (gt, g1t) = (gamma.eval(t), g1.eval(t));
        for (ix, &x) in xs.iter().enumerate() {
            let s: f64 = coeffs.iter().map(|&(k, c)| c * (k * x).sin()).sum();
            values[ix * ts.len() + it] = C64::new(gt + g1t * x + s, 0.0);
        }
    }
    Ok(SolutionField {
        xs: xs.to_vec(),
        ts: ts.to_vec(),
        values,
        trunc_est: vec![0.0; xs.len() * ts.len()],
        tau: None,
        contour_spec: None,
    })
}

fn derivative(g: &PiecewisePoly) -> PiecewisePoly {
    PiecewisePoly::new(
        g.breakpoints().to_vec(),
        g.pieces().iter().map(|p| p.derivative()).collect(),
    )
    .expect("same breakpoints")
}

/// Interior jumps `(s, g(s⁺) - g(s⁻))`.
fn jumps(g: &PiecewisePoly) -> Vec<(f64, f64)> {
    let b = g.breakpoints();
    (1..b.len() - 1)
        .map(|i| (b[i], g.pieces()[i].eval(b[i]) - g.pieces()[i - 1].eval(b[i])))
        .filter(|j| j.1 != 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    #[test]
    fn hat_weights_integrate_linear_functions_exactly() {
        let k = Weight::new(vec![0.0, 0.37, 1.0], vec![Poly::new(vec![1.0, 2.0]), Poly::new(vec![0.5, 0.0, -1.0])]).unwrap();
        let c = constraint_weights(&k, 32);
        let exact = k.density().integral(0.0, 1.0);
        assert!((c.iter().sum::<f64>() - exact).abs() < 1e-14);
        let xk: f64 = c.iter().enumerate().map(|(i, ci)| ci * i as f64 / 32.0).sum();
        let exact_x = 0.37f64.powi(2) / 2.0 + 2.0 * 0.37f64.powi(3) / 3.0 + 0.5 * (1.0 - 0.37f64.powi(2)) / 2.0
            - (1.0 - 0.37f64.powi(4)) / 4.0;
        assert!((xk - exact_x).abs() < 1e-14);
        let a = Weight::atomic(vec![(0.0, 1.0), (0.3, 2.0)]).unwrap();
        let ca = constraint_weights(&a, 20);
        assert!((ca[0] - 1.0).abs() < 1e-15 && (ca[6] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_and_zero_data() {
        let p = HeatProblem::new(
            SpaceSignal::constant(2.0),
            TimeSignal::constant(1.0, 1.0),
            TimeSignal::zero(1.0),
            Weight::constant(0.5),
            1.0,
        )
        .unwrap();
        let s = fd_solve(&p, &FdConfig { n_space: 32, dt: 1e-2, rannacher_steps: 2 }, &[0.0, 0.3, 1.0], &[0.1, 0.5]).unwrap();
        assert!(s.projection < 1e-14);
        for v in &s.field.values {
            assert!((v.re - 2.0).abs() < 1e-12);
        }
        assert!(s.constraint_residual < 1e-12);
        let z = HeatProblem::new(SpaceSignal::zero(), TimeSignal::zero(1.0), TimeSignal::zero(1.0), Weight::constant(1.0), 1.0).unwrap();
        let s = fd_solve(&z, &FdConfig::default(), &[0.5], &[0.2]).unwrap();
        assert_eq!(s.field.values[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn quadratic_solution_is_reproduced() {
        // u = x² + 2t is reproduced exactly by second differences
        let k = Weight::new(vec![0.0, 1.0], vec![Poly::new(vec![1.0, -0.5])]).unwrap();
        let p = HeatProblem::new(
            SpaceSignal::poly(vec![0.0, 0.0, 1.0]),
            TimeSignal::poly(1.0, vec![5.0 / 24.0, 1.5]),
            TimeSignal::constant(1.0, 2.0),
            k,
            1.0,
        )
        .unwrap();
        let s = fd_solve(&p, &FdConfig { n_space: 64, dt: 1e-3, rannacher_steps: 2 }, &[0.25, 0.5], &[0.1, 0.2]).unwrap();
        for (ix, x) in s.field.xs.iter().enumerate() {
            for (it, t) in s.field.ts.iter().enumerate() {
                // the hat weights integrate x² with an O(h²) error, which shifts the constant
                assert!((s.field.at(ix, it).re - (x * x + 2.0 * t)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn incompatible_data_is_projected() {
        let p = HeatProblem::new(SpaceSignal::constant(1.0), TimeSignal::zero(1.0), TimeSignal::zero(1.0), Weight::constant(1.0), 1.0).unwrap();
        let s = fd_solve(&p, &FdConfig { n_space: 32, dt: 1e-3, rannacher_steps: 2 }, &[0.5], &[0.1]).unwrap();
        assert!(s.projection > 0.1);
        assert!(s.constraint_residual < 1e-12);
    }

    #[test]
    fn series_single_mode() {
        // q0 = sin(πx/2), approximated by piecewise cubics
        let xs = [0.2, 0.6];
        let ts = [0.05, 0.3];
        let nb = 64;
        let bps: Vec<f64> = (0..=nb).map(|i| i as f64 / nb as f64).collect();
        let pieces: Vec<Poly> = bps
            .windows(2)
            .map(|w| {
                // cubic Taylor polynomial about the left end
                let a = w[0];
                let k = std::f64::consts::FRAC_PI_2;
                let (s, c) = (k * a).sin_cos();
                let local = Poly::new(vec![s, k * c, -k * k * s / 2.0, -k * k * k * c / 6.0]);
                Poly::new(local.shifted(-a))
            })
            .collect();
        let q0 = SpaceSignal::new(bps, pieces).unwrap();
        let f = series_solve_dirichlet(&q0, &TimeSignal::zero(1.0), &TimeSignal::zero(1.0), &xs, &ts).unwrap();
        for (ix, x) in xs.iter().enumerate() {
            for (it, t) in ts.iter().enumerate() {
                let exact = (-std::f64::consts::PI.powi(2) * t / 4.0).exp() * (std::f64::consts::FRAC_PI_2 * x).sin();
                assert!((f.at(ix, it).re - exact).abs() < 1e-6, "{}", f.at(ix, it).re - exact);
            }
        }
    }

    #[test]
    fn series_relaxes_to_boundary_value() {
        let f = series_solve_dirichlet(
            &SpaceSignal::zero(),
            &TimeSignal::constant(20.0, 1.0),
            &TimeSignal::zero(20.0),
            &[0.1, 0.5, 1.0],
            &[0.01, 15.0],
        )
        .unwrap();
        for ix in 0..3 {
            assert!((f.at(ix, 1).re - 1.0).abs() < 1e-8);
        }
        assert!(f.at(2, 0).re.abs() < 1e-3);
        let z = series_solve_dirichlet(&SpaceSignal::zero(), &TimeSignal::zero(1.0), &TimeSignal::zero(1.0), &[0.5], &[0.5]).unwrap();
        assert_eq!(z.values[0].re, 0.0);
    }
}
