//! Exponential-polynomial integrals in closed form.
//!
//! Every spectral quantity reduces to integrals of the form
//! `∫ p(y) e^{c y} dy` or nested versions of it, with `c = ±iλ` or `c = λ²`.
//! Along the contours these grow like `e^{|Im λ|}` (or `e^{2|Im λ|}`) so all
//! results are returned as [`Scaled`] numbers that carry their exponent
//! separately.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::poly::{merge_breakpoints, PiecewisePoly};

/// A complex number stored as `m · e^e`, with `max(|Re m|, |Im m|)` in `[1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub m: C64,
    pub e: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        m: C64::new(0.0, 0.0),
        e: 0.0,
    };

    pub fn new(m: C64, e: f64) -> Self {
        Scaled { m, e }.normalized()
    }

    pub fn from_c64(m: C64) -> Self {
        Scaled::new(m, 0.0)
    }

    pub fn real(x: f64) -> Self {
        Scaled::new(C64::new(x, 0.0), 0.0)
    }

    /// `e^z`, exact in the exponent.
    pub fn exp(z: C64) -> Self {
        Scaled {
            m: C64::from_polar(1.0, z.im),
            e: z.re,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == 0.0 && self.m.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.m.re.is_finite() && self.m.im.is_finite() && !self.e.is_nan()
    }

    fn normalized(mut self) -> Self {
        let a = self.m.re.abs().max(self.m.im.abs());
        if a == 0.0 {
            return Scaled::ZERO;
        }
        if !a.is_finite() {
            return self;
        }
        let mut a = a;
        if a < f64::MIN_POSITIVE {
            // subnormal: lift into the normal range first
            let lift = 2f64.powi(64);
            self.m *= lift;
            self.e -= 64.0 * std::f64::consts::LN_2;
            a *= lift;
        }
        let ex = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
        if ex != 0 {
            let scale = f64::from_bits(((1023 - ex) as u64) << 52);
            self.m *= scale;
            self.e += ex as f64 * std::f64::consts::LN_2;
        }
        self
    }

    /// Plain complex value; overflows to infinity when the exponent is large.
    pub fn to_c64(self) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        self.m * self.e.exp()
    }

    /// Value multiplied by `e^{-log_scale}`.
    pub fn rescaled(self, log_scale: f64) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        self.m * (self.e - log_scale).exp()
    }

    /// `ln |self|`, `-inf` for zero.
    pub fn ln_abs(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.m.norm().ln() + self.e
    }

    /// `self / other` as a plain complex number.
    pub fn ratio(self, other: Scaled) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        (self.m / other.m) * (self.e - other.e).exp()
    }

    pub fn scale_real(self, s: f64) -> Self {
        Scaled::new(self.m * s, self.e)
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, o: Scaled) -> Scaled {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        if self.e >= o.e {
            Scaled::new(self.m + o.m * (o.e - self.e).exp(), self.e)
        } else {
            Scaled::new(o.m + self.m * (self.e - o.e).exp(), o.e)
        }
    }
}

impl AddAssign for Scaled {
    fn add_assign(&mut self, o: Scaled) {
        *self = *self + o;
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled {
            m: -self.m,
            e: self.e,
        }
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, o: Scaled) -> Scaled {
        self + (-o)
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, o: Scaled) -> Scaled {
        Scaled::new(self.m * o.m, self.e + o.e)
    }
}

impl Mul<C64> for Scaled {
    type Output = Scaled;
    fn mul(self, c: C64) -> Scaled {
        Scaled::new(self.m * c, self.e)
    }
}

impl Div for Scaled {
    type Output = Scaled;
    fn div(self, o: Scaled) -> Scaled {
        Scaled::new(self.m / o.m, self.e - o.e)
    }
}

const SERIES_EPS: f64 = 1e-17;

/// Normalized moments `out[k] = e^{-σ} ∫_0^1 s^k e^{z s} ds` with
/// `σ = max(0, Re z)`. Returns `σ`.
///
/// Uses the power series for `|z| < 1`, the forward recurrence for
/// `k ≤ |z|` and a top-order series plus backward recurrence above that,
/// which keeps every branch free of cancellation.
pub fn moments(z: C64, out: &mut [C64]) -> f64 {
    let n = out.len();
    if n == 0 {
        return 0.0;
    }
    let sigma = z.re.max(0.0);
    let r = z.norm();
    if r < 1.0 {
        let damp = (-sigma).exp();
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..60 {
                let add = term / (k + j + 1) as f64;
                sum += add;
                if add.norm() < SERIES_EPS * sum.norm().max(1e-300) {
                    break;
                }
                term = term * z / (j + 1) as f64;
            }
            *o = sum * damp;
        }
        return sigma;
    }
    let big_e = (z - sigma).exp();
    let e0 = (-sigma).exp();
    let kf = (r.floor() as usize).min(n - 1);
    out[0] = (big_e - e0) / z;
    for k in 1..=kf {
        out[k] = (big_e - out[k - 1] * k as f64) / z;
    }
    if n - 1 > kf {
        let top = n - 1;
        let mut term = C64::new(1.0 / (top + 1) as f64, 0.0);
        let mut sum = term;
        for j in 1..2000 {
            term = term * (-z) / (top + j + 1) as f64;
            sum += term;
            if term.norm() < SERIES_EPS * sum.norm() {
                break;
            }
        }
        out[top] = big_e * sum;
        for k in (kf + 1..top).rev() {
            out[k] = (big_e - z * out[k + 1]) / (k + 1) as f64;
        }
    }
    sigma
}

/// `∫_a^b p(y) e^{c y} dy` for a polynomial given in local coefficients
/// `alpha` about `a`, i.e. `p(a + u) = Σ alpha_m u^m`.
fn local_piece_integral(alpha: &[f64], a: f64, h: f64, c: C64, buf: &mut Vec<C64>) -> Scaled {
    if alpha.iter().all(|&x| x == 0.0) {
        return Scaled::ZERO;
    }
    buf.clear();
    buf.resize(alpha.len(), C64::new(0.0, 0.0));
    let sigma = moments(c * h, buf);
    let mut sum = C64::new(0.0, 0.0);
    let mut hp = 1.0;
    for (am, mm) in alpha.iter().zip(buf.iter()) {
        sum += *mm * (am * hp);
        hp *= h;
    }
    Scaled::new(sum * h, sigma) * Scaled::exp(c * a)
}

/// `∫_lo^hi f(y) e^{c y} dy` for a piecewise polynomial `f`.
pub fn exp_integral(f: &PiecewisePoly, c: C64, lo: f64, hi: f64) -> Scaled {
    let mut buf = Vec::new();
    let mut acc = Scaled::ZERO;
    for (a, b, p) in f.segments_within(lo, hi) {
        if p.is_zero() {
            continue;
        }
        let alpha = p.shifted(a);
        acc += local_piece_integral(&alpha, a, b - a, c, &mut buf);
    }
    acc
}

/// A real measure on `[0,1]`: a piecewise-polynomial density plus point masses.
#[derive(Debug, Clone, Copy)]
pub struct Measure<'a> {
    pub density: &'a PiecewisePoly,
    pub atoms: &'a [(f64, f64)],
}

impl<'a> Measure<'a> {
    pub fn density_only(density: &'a PiecewisePoly) -> Self {
        Measure { density, atoms: &[] }
    }

    /// `∫ e^{c y} dμ(y)` over `[lo, hi]` (atoms at both ends included).
    pub fn exp_integral(&self, c: C64, lo: f64, hi: f64) -> Scaled {
        let mut acc = if self.density.is_zero() {
            Scaled::ZERO
        } else {
            exp_integral(self.density, c, lo, hi)
        };
        for &(y, mass) in self.atoms {
            if y >= lo && y <= hi && mass != 0.0 {
                acc += Scaled::exp(c * y).scale_real(mass);
            }
        }
        acc
    }
}

/// `∫_0^1 e^{c1 y} ∫_0^y e^{c2 z} dν(z) dμ(y)` over the unit interval.
///
/// Atom-atom pairs count only when the inner atom lies strictly to the left.
pub fn double_integral(mu: Measure, c1: C64, nu: Measure, c2: C64) -> Scaled {
    let mut acc = Scaled::ZERO;
    if !mu.density.is_zero() && !nu.density.is_zero() {
        acc += double_density(mu.density, c1, nu.density, c2);
    }
    // outer atoms: e^{c1 y_j} ∫_0^{y_j} e^{c2 z} dν_density
    if !nu.density.is_zero() {
        for &(y, mass) in mu.atoms {
            if mass != 0.0 && y > 0.0 {
                acc += (Scaled::exp(c1 * y) * exp_integral(nu.density, c2, 0.0, y)).scale_real(mass);
            }
        }
    }
    // inner atoms: e^{c2 z_j} ∫_{z_j}^1 e^{c1 y} dμ_density
    if !mu.density.is_zero() {
        for &(z, mass) in nu.atoms {
            if mass != 0.0 && z < 1.0 {
                acc += (Scaled::exp(c2 * z) * exp_integral(mu.density, c1, z, 1.0)).scale_real(mass);
            }
        }
    }
    for &(y, my) in mu.atoms {
        for &(z, mz) in nu.atoms {
            if z < y {
                acc += (Scaled::exp(c1 * y + c2 * z)).scale_real(my * mz);
            }
        }
    }
    acc
}

/// Number of extra orders used by the small-`z2` series of the triangle
/// integral. `2^28/28!` is far below double precision.
const TRI_SERIES_TERMS: usize = 28;

/// `∫_0^1 f(y) e^{c1 y} ∫_0^y g(z) e^{c2 z} dz dy` for two piecewise
/// polynomials sharing the domain `[0,1]`.
pub fn double_density(f: &PiecewisePoly, c1: C64, g: &PiecewisePoly, c2: C64) -> Scaled {
    let bps = merge_breakpoints(f.breakpoints(), g.breakpoints());
    let mut prefix = Scaled::ZERO;
    let mut acc = Scaled::ZERO;
    let mut buf = Vec::new();
    let mut m1 = Vec::new();
    let mut m12 = Vec::new();
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        let mid = 0.5 * (a + b);
        let fp = &f.pieces()[f.piece_index(mid)];
        let gp = &g.pieces()[g.piece_index(mid)];
        let alpha = fp.shifted(a);
        let beta = gp.shifted(a);
        let f_zero = fp.is_zero();
        let g_zero = gp.is_zero();
        if !f_zero {
            let a_j = local_piece_integral(&alpha, a, h, c1, &mut buf);
            acc += a_j * prefix;
            if !g_zero {
                acc += triangle(&alpha, &beta, a, h, c1, c2, &mut m1, &mut m12);
            }
        }
        if !g_zero {
            prefix += local_piece_integral(&beta, a, h, c2, &mut buf);
        }
    }
    acc
}

/// Triangle part on one sub-interval: `∫_a^b f e^{c1 y} ∫_a^y g e^{c2 z}`.
#[allow(clippy::too_many_arguments)]
fn triangle(
    alpha: &[f64],
    beta: &[f64],
    a: f64,
    h: f64,
    c1: C64,
    c2: C64,
    m1: &mut Vec<C64>,
    m12: &mut Vec<C64>,
) -> Scaled {
    let z1 = c1 * h;
    let z2 = c2 * h;
    let dm = alpha.len();
    let dn = beta.len();
    let prefactor = Scaled::exp((c1 + c2) * a).scale_real(h * h);
    let mut hpow = vec![1.0; dm + dn];
    for i in 1..hpow.len() {
        hpow[i] = hpow[i - 1] * h;
    }
    if z2.norm() <= 2.0 {
        // e^{z2 r} expanded: T_mn = Σ_l z2^l / (l! (n+l+1)) M_{m+n+l+1}(z1)
        m1.clear();
        m1.resize(dm + dn + TRI_SERIES_TERMS + 1, C64::new(0.0, 0.0));
        let sigma = moments(z1, m1);
        let mut total = C64::new(0.0, 0.0);
        for (mi, &am) in alpha.iter().enumerate() {
            if am == 0.0 {
                continue;
            }
            for (ni, &bn) in beta.iter().enumerate() {
                if bn == 0.0 {
                    continue;
                }
                let mut term = C64::new(1.0, 0.0);
                let mut t = C64::new(0.0, 0.0);
                for l in 0..TRI_SERIES_TERMS {
                    t += term * m1[mi + ni + l + 1] / (ni + l + 1) as f64;
                    term = term * z2 / (l + 1) as f64;
                }
                total += t * (am * bn * hpow[mi + ni]);
            }
        }
        return Scaled::new(total, sigma) * prefactor;
    }
    // Closed form of the inner integral:
    // ∫_0^s r^n e^{z2 r} dr = Σ_k (-1)^{n-k} n!/k! s^k e^{z2 s}/z2^{n-k+1} - (-1)^n n!/z2^{n+1}
    m1.clear();
    m1.resize(dm, C64::new(0.0, 0.0));
    m12.clear();
    m12.resize(dm + dn, C64::new(0.0, 0.0));
    let s1 = moments(z1, m1);
    let s12 = moments(z1 + z2, m12);
    let inv = 1.0 / z2;
    let mut inv_pow = vec![C64::new(1.0, 0.0); dn + 2];
    for i in 1..inv_pow.len() {
        inv_pow[i] = inv_pow[i - 1] * inv;
    }
    let mut part12 = C64::new(0.0, 0.0);
    let mut part1 = C64::new(0.0, 0.0);
    for (mi, &am) in alpha.iter().enumerate() {
        if am == 0.0 {
            continue;
        }
        for (ni, &bn) in beta.iter().enumerate() {
            if bn == 0.0 {
                continue;
            }
            let w = am * bn * hpow[mi + ni];
            // n!/k! built downward from k = n
            let mut ratio = 1.0;
            let mut t12 = C64::new(0.0, 0.0);
            for k in (0..=ni).rev() {
                let sign = if (ni - k) % 2 == 0 { 1.0 } else { -1.0 };
                t12 += m12[mi + k] * inv_pow[ni - k + 1] * (sign * ratio);
                ratio *= k as f64;
            }
            let nfact: f64 = (1..=ni).map(|v| v as f64).product();
            let sign_n = if ni % 2 == 0 { 1.0 } else { -1.0 };
            part12 += t12 * w;
            part1 += m1[mi] * inv_pow[ni + 1] * (sign_n * nfact * w);
        }
    }
    (Scaled::new(part12, s12) - Scaled::new(part1, s1)) * prefactor
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    /// Composite Gauss–Legendre (order 20) oracle on `[a,b]` with `n` panels.
    fn quad(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
        let (x, w) = crate::contours::gauss_legendre(20);
        let h = (b - a) / n as f64;
        let mut s = C64::new(0.0, 0.0);
        for p in 0..n {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let y = lo + 0.5 * h * (xi + 1.0);
                s += f(y) * (0.5 * h * wi);
            }
        }
        s
    }

    /// `quad` split at the given breakpoints.
    fn quad_pw(f: impl Fn(f64) -> C64, a: f64, b: f64, bps: &[f64], n: usize) -> C64 {
        let mut cuts = vec![a];
        cuts.extend(bps.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        cuts.windows(2).map(|w| quad(&f, w[0], w[1], n)).sum()
    }

    fn close(a: C64, b: C64, rel: f64) -> bool {
        (a - b).norm() <= rel * (1.0 + b.norm())
    }

    #[test]
    fn scaled_arithmetic() {
        let a = Scaled::from_c64(C64::new(3.0, -4.0));
        let b = Scaled::exp(C64::new(800.0, 0.3));
        let p = a * b;
        assert!((p.ln_abs() - (5f64.ln() + 800.0)).abs() < 1e-12);
        assert!(((a + a).to_c64() - C64::new(6.0, -8.0)).norm() < 1e-14);
        assert!((p.ratio(b) - C64::new(3.0, -4.0)).norm() < 1e-13);
        assert!((b - b).is_zero());
    }

    #[test]
    fn moments_match_quadrature_across_branches() {
        let zs = [
            C64::new(0.0, 0.0),
            C64::new(0.3, -0.2),
            C64::new(-0.9, 0.0),
            C64::new(1.5, 0.0),
            C64::new(0.0, 7.3),
            C64::new(-30.0, 2.0),
            C64::new(25.0, -40.0),
            C64::new(3.0, 3.0),
        ];
        for z in zs {
            let mut m = vec![C64::new(0.0, 0.0); 12];
            let sigma = moments(z, &mut m);
            for (k, mk) in m.iter().enumerate() {
                let want = quad(|s| s.powi(k as i32) * (z * s - sigma).exp(), 0.0, 1.0, 40);
                assert!(close(*mk, want, 1e-13), "z={z} k={k}: {mk} vs {want}");
            }
        }
    }

    #[test]
    fn piece_integral_closed_forms() {
        let one = PiecewisePoly::constant(0.0, 1.0, 1.0);
        let c = C64::new(0.2, 1.7);
        let got = exp_integral(&one, c, 0.0, 1.0).to_c64();
        assert!(close(got, (c.exp() - 1.0) / c, 1e-14));
        let got = exp_integral(&one, C64::new(0.0, 0.0), 0.0, 0.4).to_c64();
        assert!(close(got, C64::new(0.4, 0.0), 1e-15));
    }

    #[test]
    fn double_integral_matches_nested_quadrature() {
        let f = PiecewisePoly::new(
            vec![0.0, 0.3, 1.0],
            vec![Poly::new(vec![1.0, -2.0, 0.5]), Poly::new(vec![0.2, 0.1, 0.0, 1.0])],
        )
        .unwrap();
        let g = PiecewisePoly::new(
            vec![0.0, 0.55, 1.0],
            vec![Poly::new(vec![0.5, 1.0]), Poly::new(vec![-1.0, 0.0, 2.0])],
        )
        .unwrap();
        for (c1, c2) in [
            (C64::new(0.0, 3.0), C64::new(0.0, -3.0)),
            (C64::new(-0.5, 1.0), C64::new(0.1, 0.2)),
            (C64::new(4.0, -9.0), C64::new(4.0, -9.0)),
            (C64::new(-12.0, 0.0), C64::new(12.0, 5.0)),
        ] {
            let got = double_density(&f, c1, &g, c2).to_c64();
            let want = quad_pw(
                |y| {
                    let inner = quad_pw(|z| g.eval(z) * (c2 * z).exp(), 0.0, y, g.breakpoints(), 8);
                    f.eval(y) * (c1 * y).exp() * inner
                },
                0.0,
                1.0,
                &merge_breakpoints(f.breakpoints(), g.breakpoints()),
                40,
            );
            assert!(close(got, want, 1e-11), "{c1},{c2}: {got} vs {want}");
        }
    }

    #[test]
    fn atoms_in_double_integral() {
        let g = PiecewisePoly::constant(0.0, 1.0, 1.0);
        let zero = PiecewisePoly::constant(0.0, 1.0, 0.0);
        let atoms = [(0.5, 2.0)];
        let mu = Measure {
            density: &zero,
            atoms: &atoms,
        };
        let c = C64::new(0.0, 1.0);
        let got = double_integral(mu, c, Measure::density_only(&g), c).to_c64();
        let want = 2.0 * (c * 0.5).exp() * ((c * 0.5).exp() - 1.0) / c;
        assert!(close(got, want, 1e-14));
    }
}
