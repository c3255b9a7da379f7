//! The four commands. Tables go to `out` as CSV; one-line summaries go to
//! `log`.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use clap::ValueEnum;
use nlheat::contours::{count_zeros, Rect};
use nlheat::kernel::Scaled;
use nlheat::multipoint::{dirichlet_limit_weight, evaluate_grid_m, MultipointWeight};
use nlheat::oracle::{fd_solve, series_solve_dirichlet};
use nlheat::solver::{
    default_tau, evaluate_grid_with, evaluate_strip, residuals_with, HeatProblem, SolutionField, TauRule,
};
use nlheat::transforms::{
    delta_scaled, fourier_q0_scaled, zeta_minus_scaled, zeta_plus_scaled, SpaceSignal, TimeSignal,
};
use nlheat::weights::Weight;
use nlheat::Complex64 as C64;

use crate::{CliError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareMode {
    Oracle,
    Multipoint,
    DirichletLimit,
}

/// Spot values of `λ` for the cancellation identity, all with `|λ| ≤ 50`.
const SPOT_LAMBDAS: [(f64, f64); 8] = [
    (0.5, 0.0),
    (3.0, 1.0),
    (-7.0, 2.0),
    (10.0, -5.0),
    (0.0, 20.0),
    (-30.0, -10.0),
    (25.0, 25.0),
    (-12.0, -45.0),
];

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn quantity_table(out: &mut dyn Write, rows: &[(&str, String)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn tau_rule(cfg: &RunConfig, p: &HeatProblem, ts: &[f64]) -> TauRule {
    cfg.grid.tau.unwrap_or_else(|| TauRule::Fixed(default_tau(p, ts)))
}

/// Zero-exclusion bound and an argument-principle census of `Δ` inside and
/// just outside the strip `|Im λ| < M`.
pub fn cmd_bound(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let h = cfg.problem.horizon;
    let weight = cfg.weight()?;
    let p = HeatProblem::new(SpaceSignal::zero(), TimeSignal::zero(h), TimeSignal::zero(h), weight.clone(), h)?;
    let mut rows: Vec<(&str, String)> = Vec::new();
    if let Some(zb) = p.zero_bound() {
        rows.extend([
            ("support_a", fmt(zb.support_a)),
            ("support_b", fmt(zb.support_b)),
            ("k_at_b", fmt(zb.k_at_b)),
            ("total_variation", fmt(zb.total_variation)),
            ("delta0", fmt(zb.delta0)),
            ("m", fmt(zb.m)),
            ("r", fmt(zb.r)),
        ]);
    }
    let m = p.strip_bound();
    let (width, inside, outside) = strip_census(&weight, m)?;
    let radius = p.auto_radius(m)?;
    rows.extend([
        ("strip_bound", fmt(m)),
        ("census_width", fmt(width)),
        ("zeros_in_strip", inside.to_string()),
        ("zeros_outside_strip", outside.to_string()),
        ("certified_radius", fmt(radius)),
    ]);
    quantity_table(out, &rows)?;
    writeln!(log, "{inside} zeros with |Re λ| < {width:.3} inside |Im λ| < {m:.4}, {outside} outside")?;
    if outside != 0 {
        return Err(CliError::Tolerance(format!("{outside} zeros found outside the strip |Im λ| < {m}")));
    }
    Ok(())
}

/// Zeros in `[-X, X] × [-M, M]` and in the two bands `M ≤ |Im λ| ≤ 3M`.
/// `X` is nudged when a zero lies on a vertical edge.
fn strip_census(weight: &Weight, m: f64) -> Result<(f64, i64, i64), CliError> {
    let f = |l: C64| delta_scaled(weight, l).m;
    let mut x = (2.0 * m).max(20.0);
    let mut last = None;
    for _ in 0..6 {
        let nodes = ((8.0 * x).ceil() as usize).max(32);
        let counts = count_zeros(f, Rect::new(-x, x, -m, m), nodes).and_then(|inside| {
            let up = count_zeros(f, Rect::new(-x, x, m, 3.0 * m), nodes)?;
            let down = count_zeros(f, Rect::new(-x, x, -3.0 * m, -m), nodes)?;
            Ok((inside, up + down))
        });
        match counts {
            Ok((inside, outside)) => return Ok((x, inside, outside)),
            Err(e @ nlheat::Error::ContourThroughZero { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
        x *= 1.0137;
    }
    Err(last.unwrap().into())
}

/// Grid solve. Interior points use the sector contours; `x = 0` and `x = 1`
/// use the strip route (τ = t there, no tail estimate).
pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let p = cfg.problem()?;
    let xs = cfg.grid.xs.points();
    let ts = cfg.grid.ts.points();
    if xs.is_empty() || ts.is_empty() {
        return Err(CliError::Config("grid.xs and grid.ts must be non-empty".into()));
    }
    let interior: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0 && x < 1.0).collect();
    let field = if interior.is_empty() {
        None
    } else {
        Some(evaluate_grid_with(&p, &interior, &ts, &cfg.contour, tau_rule(cfg, &p, &ts))?)
    };
    let positive: Vec<f64> = ts.iter().copied().filter(|&t| t > 0.0).collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "t", "re_q", "im_q", "trunc_est"])?;
    let mut ix_interior = 0;
    let mut worst_tail: f64 = 0.0;
    for &x in &xs {
        if x > 0.0 && x < 1.0 {
            let f = field.as_ref().unwrap();
            for (it, &t) in ts.iter().enumerate() {
                let v = f.at(ix_interior, it);
                let tail = f.trunc_est[ix_interior * ts.len() + it];
                worst_tail = worst_tail.max(tail);
                w.write_record([x.to_string(), t.to_string(), fmt(v.re), fmt(v.im), fmt(tail)])?;
            }
            ix_interior += 1;
        } else {
            let strip = if positive.is_empty() {
                Vec::new()
            } else {
                evaluate_strip(&p, x, &positive, &cfg.contour)?
            };
            let mut k = 0;
            for &t in &ts {
                let v = if t > 0.0 {
                    k += 1;
                    strip[k - 1]
                } else {
                    C64::new(p.q0.eval_mid(x), 0.0)
                };
                w.write_record([x.to_string(), t.to_string(), fmt(v.re), fmt(v.im), String::new()])?;
            }
        }
    }
    w.flush()?;
    writeln!(log, "{} points, largest tail estimate {worst_tail:.2e}", xs.len() * ts.len())?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`; `None` when any value is 0.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().chain(x).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map(fmt).unwrap_or_default()
}

/// Slopes of `|ζ⁻/Δ|` on the lower rays and `|ζ⁺/Δ|` on the upper rays at
/// `|λ| = 2^k R`, `k = 1..8`; the larger slope of each pair.
fn decay_slopes(k: &Weight, phi: &SpaceSignal, r: f64) -> (Option<f64>, Option<f64>) {
    let mags: Vec<f64> = (1..=8).map(|j| r * 2f64.powi(j)).collect();
    let fit = |args: [f64; 2], zeta: &dyn Fn(C64) -> Scaled| {
        args.iter()
            .map(|&a| {
                let y: Vec<f64> = mags
                    .iter()
                    .map(|&m| {
                        let l = C64::from_polar(m, a);
                        zeta(l).ratio(delta_scaled(k, l)).norm()
                    })
                    .collect();
                loglog_slope(&mags, &y)
            })
            .try_fold(f64::NEG_INFINITY, |acc, s| s.map(|s| acc.max(s)))
    };
    let minus = fit([-FRAC_PI_4, -3.0 * FRAC_PI_4], &|l| zeta_minus_scaled(k, phi, l));
    let plus = fit([FRAC_PI_4, 3.0 * FRAC_PI_4], &|l| zeta_plus_scaled(k, phi, l));
    (minus, plus)
}

/// Largest `|ζ⁺ - e^{-iλ}ζ⁻ - Δ q̂0|`, relative to the largest of the three terms.
fn cancellation_residual(k: &Weight, phi: &SpaceSignal) -> f64 {
    SPOT_LAMBDAS
        .iter()
        .map(|&(re, im)| {
            let l = C64::new(re, im);
            let zp = zeta_plus_scaled(k, phi, l);
            let zm = Scaled::exp(-C64::i() * l) * zeta_minus_scaled(k, phi, l);
            let dq = delta_scaled(k, l) * fourier_q0_scaled(phi, l);
            let s = zp.ln_abs().max(zm.ln_abs()).max(dq.ln_abs());
            if s == f64::NEG_INFINITY {
                return 0.0;
            }
            (zp.rescaled(s) - zm.rescaled(s) - dq.rescaled(s)).norm()
        })
        .fold(0.0, f64::max)
}

/// Residuals of the computed solution, decay fits and identity spot checks.
/// Fails when a residual exceeds `outputs.tolerance`.
pub fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let p = cfg.problem()?;
    let xs = cfg.grid.xs.points();
    let ts: Vec<f64> = cfg.grid.ts.points().into_iter().filter(|&t| t > 0.0).collect();
    let field = evaluate_grid_with(&p, &xs, &ts, &cfg.contour, tau_rule(cfg, &p, &ts))?;
    let report = residuals_with(&p, &field, &cfg.contour, &cfg.outputs.residual)?;
    let tail = field.trunc_est.iter().copied().fold(0.0, f64::max);
    let (minus, plus) = match p.zero_bound() {
        Some(zb) if !p.q0.is_zero() => decay_slopes(&p.weight, &p.q0, zb.r),
        _ => (None, None),
    };
    let cancel = cancellation_residual(&p.weight, &p.q0);
    let rows = [
        ("pde_residual_sup", fmt(report.pde_residual_sup)),
        ("ic_residual_sup", fmt(report.ic_residual_sup)),
        ("bc_residual_sup", fmt(report.bc_residual_sup)),
        ("nc_residual_sup", fmt(report.nc_residual_sup)),
        ("tau_independence", fmt(report.tau_independence)),
        ("max_trunc_est", fmt(tail)),
        ("decay_slope_minus", fmt_slope(minus)),
        ("decay_slope_plus", fmt_slope(plus)),
        ("cancellation_residual", fmt(cancel)),
    ];
    quantity_table(out, &rows)?;
    let worst = report.max();
    let tol = cfg.outputs.tolerance;
    writeln!(log, "largest residual {worst:.2e} (tolerance {tol:.1e})")?;
    if !(worst <= tol) {
        let mut msg = format!("largest residual {worst:.3e} exceeds {tol:.1e}");
        if tail > tol {
            msg.push_str(&format!(
                "; outer contour panels contribute up to {tail:.3e}, so the truncation at |λ| = {} is too short",
                cfg.contour.max_abs_lambda
            ));
        }
        return Err(CliError::Tolerance(msg));
    }
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig, mode: CompareMode, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    match mode {
        CompareMode::Oracle => compare_oracle(cfg, out, log),
        CompareMode::Multipoint => compare_multipoint(cfg, out, log),
        CompareMode::DirichletLimit => compare_dirichlet(cfg, out, log),
    }
}

fn interior_grid(cfg: &RunConfig) -> (Vec<f64>, Vec<f64>) {
    let xs = cfg.grid.xs.points();
    let ts = cfg.grid.ts.points().into_iter().filter(|&t| t > 0.0).collect();
    (xs, ts)
}

fn compare_oracle(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let p = cfg.problem()?;
    let (xs, ts) = interior_grid(cfg);
    let contour = evaluate_grid_with(&p, &xs, &ts, &cfg.contour, tau_rule(cfg, &p, &ts))?;
    let c = &cfg.compare;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "n_space", "dt", "sup_diff", "self_diff", "projection"])?;
    let mut fd_cfg = c.fd;
    let mut prev: Option<SolutionField> = None;
    let mut self_diff = f64::INFINITY;
    let mut diff = f64::INFINITY;
    for level in 0..=c.fd_refinements {
        let sol = fd_solve(&p, &fd_cfg, &xs, &ts)?;
        diff = contour.sup_distance(&sol.field);
        let sd = prev.as_ref().map(|f| f.sup_distance(&sol.field));
        w.write_record([
            level.to_string(),
            fd_cfg.n_space.to_string(),
            fmt(fd_cfg.dt),
            fmt(diff),
            sd.map(fmt).unwrap_or_default(),
            fmt(sol.projection),
        ])?;
        prev = Some(sol.field);
        if let Some(sd) = sd {
            self_diff = sd;
            if sd < c.fd_self_tolerance {
                break;
            }
        }
        fd_cfg = fd_cfg.refined();
    }
    w.flush()?;
    writeln!(log, "contour vs oracle {diff:.2e} (tolerance {:.1e}), oracle self-difference {self_diff:.2e}", c.oracle_tolerance)?;
    if !(self_diff < c.fd_self_tolerance) {
        return Err(CliError::Tolerance(format!(
            "oracle did not converge to {:.1e} (last self-difference {self_diff:.3e})",
            c.fd_self_tolerance
        )));
    }
    if !(diff <= c.oracle_tolerance) {
        return Err(CliError::Tolerance(format!("contour vs oracle {diff:.3e} exceeds {:.1e}", c.oracle_tolerance)));
    }
    Ok(())
}

fn sweep_report(
    out: &mut dyn Write,
    log: &mut dyn Write,
    name: &str,
    params: &[usize],
    diffs: &[f64],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([name, "sup_diff"])?;
    for (k, d) in params.iter().zip(diffs) {
        w.write_record([k.to_string(), fmt(*d)])?;
    }
    w.flush()?;
    let x: Vec<f64> = params.iter().map(|&k| k as f64).collect();
    match loglog_slope(&x, diffs) {
        Some(s) => writeln!(log, "fitted slope {s:.3} in {name}")?,
        None => writeln!(log, "no slope: some differences are zero")?,
    }
    if diffs.windows(2).any(|d| d[1] > d[0]) {
        return Err(CliError::Tolerance(format!("differences do not decrease in {name}")));
    }
    Ok(())
}

fn compare_multipoint(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let p = cfg.problem()?;
    let (xs, ts) = interior_grid(cfg);
    let tau = tau_rule(cfg, &p, &ts);
    let reference = evaluate_grid_with(&p, &xs, &ts, &cfg.contour, tau)?;
    let ms = &cfg.compare.m_list;
    let mut diffs = Vec::with_capacity(ms.len());
    for &m in ms {
        let w = MultipointWeight::from_weight(&p.weight, m)?;
        let f = evaluate_grid_m(&w, &p, &xs, &ts, &cfg.contour, tau)?;
        diffs.push(f.sup_distance(&reference));
    }
    sweep_report(out, log, "m", ms, &diffs)
}

/// `K_j` in place of the configured weight, against the eigenfunction series
/// with `q(0,t) = g0(t)`.
fn compare_dirichlet(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let (q0, g0, g1) = (cfg.q0()?, cfg.g0()?, cfg.g1()?);
    let (xs, ts) = interior_grid(cfg);
    let series = series_solve_dirichlet(&q0, &g0, &g1, &xs, &ts)?;
    let js = &cfg.compare.j_list;
    let mut diffs = Vec::with_capacity(js.len());
    for &j in js {
        let p = HeatProblem::new(q0.clone(), g0.clone(), g1.clone(), dirichlet_limit_weight(j)?, cfg.problem.horizon)?;
        let f = evaluate_grid_with(&p, &xs, &ts, &cfg.contour, tau_rule(cfg, &p, &ts))?;
        diffs.push(f.sup_distance(&series));
    }
    sweep_report(out, log, "j", js, &diffs)
}
