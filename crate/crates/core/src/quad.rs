//! Quadrature building blocks: Gauss–Legendre rules, adaptive Gauss–Kronrod,
//! double-exponential (tanh-sinh) integration for endpoint singularities and a
//! Filon–Legendre panel rule for oscillatory Fourier integrals.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of nodes of the panel rule used by the Fourier integrators.
pub const PANEL_NODES: usize = 24;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared `PANEL_NODES`-point Gauss–Legendre rule.
pub fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_NODES))
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077656069162117,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One 21-point Kronrod panel: returns `(kronrod, |kronrod - gauss|)`.
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[10];
    let mut rg = 0.0;
    for j in 0..10 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (21-point) integration with global bisection.
///
/// Stops when the summed error estimate falls below `max(abs_tol, rel_tol * |I|)`.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    context: &str,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    adaptive_gk_breaks(f, &[a, b], abs_tol, rel_tol, context)
}

/// [`adaptive_gk`] seeded with the panels delimited by `breaks`; the error
/// criterion applies to the total over all panels.
pub fn adaptive_gk_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    context: &str,
) -> Result<f64> {
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| {
            let (v, e) = gk21(&mut f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    if panels.is_empty() {
        return Ok(0.0);
    }
    let budget = 2000 + 4 * panels.len();
    for _ in 0..budget {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty panel list");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            break;
        }
        let (v1, e1) = gk21(&mut f, pa, m);
        let (v2, e2) = gk21(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
    let total: f64 = panels.iter().map(|p| p.2).sum();
    let err: f64 = panels.iter().map(|p| p.3).sum();
    if err <= 1e3 * abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Quadrature { context: context.to_string(), error: err })
    }
}

/// Tanh-sinh integration of `f` over `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` so that algebraic endpoint
/// singularities can be evaluated from the exact distances to the endpoints.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    context: &str,
) -> Result<f64> {
    let hl = 0.5 * (b - a);
    let tau_max = 6.5;
    let mut term = |tau: f64| -> f64 {
        let u = 0.5 * PI * tau.sinh();
        let cu = u.cosh();
        let w = hl * 0.5 * PI * tau.cosh() / (cu * cu);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let (da, db) = if u >= 0.0 {
            let e = (-2.0 * u).exp();
            (hl * 2.0 / (1.0 + e), hl * 2.0 * e / (1.0 + e))
        } else {
            let e = (2.0 * u).exp();
            (hl * 2.0 * e / (1.0 + e), hl * 2.0 / (1.0 + e))
        };
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        w * f(x, da, db)
    };
    let mut h = 0.5;
    let n0 = (tau_max / h) as i64;
    let mut sum = term(0.0);
    for k in 1..=n0 {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
    }
    let mut prev = sum * h;
    let mut change = f64::NAN;
    for _level in 0..12 {
        h *= 0.5;
        let n = (tau_max / h) as i64;
        let mut k = 1;
        while k <= n {
            let t = k as f64 * h;
            sum += term(t) + term(-t);
            k += 2;
        }
        let cur = sum * h;
        change = (cur - prev).abs();
        if change <= rel_tol * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature { context: context.to_string(), error: change })
}

/// Filon–Legendre panel rule for `∫ g(s) e^{iωs} ds` over `[-1, 1]`.
///
/// `g` is represented by its Legendre expansion built from the values at the
/// nodes of [`panel_rule`]; the moments `∫ P_k(s) e^{iωs} ds = 2 i^k j_k(ω)`
/// are evaluated with spherical Bessel functions.
#[derive(Debug, Clone)]
pub struct FilonLegendre {
    /// `proj[k][i] = (2k+1)/2 * w_i * P_k(s_i)`.
    proj: Vec<[f64; PANEL_NODES]>,
}

/// Threshold on `ω` above which the Filon moments replace plain Gauss–Legendre.
pub const FILON_OMEGA: f64 = 2.0;

impl FilonLegendre {
    fn new() -> Self {
        let rule = panel_rule();
        let mut proj = vec![[0.0; PANEL_NODES]; PANEL_NODES];
        for (i, (&s, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let mut p0 = 1.0;
            let mut p1 = s;
            for k in 0..PANEL_NODES {
                let pk = if k == 0 {
                    1.0
                } else if k == 1 {
                    s
                } else {
                    let kf = (k - 1) as f64;
                    let p2 = ((2.0 * kf + 1.0) * s * p1 - kf * p0) / (kf + 1.0);
                    p0 = p1;
                    p1 = p2;
                    p2
                };
                proj[k][i] = (2.0 * k as f64 + 1.0) * 0.5 * w * pk;
            }
        }
        FilonLegendre { proj }
    }

    /// Shared instance.
    pub fn get() -> &'static FilonLegendre {
        static F: OnceLock<FilonLegendre> = OnceLock::new();
        F.get_or_init(FilonLegendre::new)
    }

    /// Legendre coefficients of the polynomial interpolating `values` at the panel nodes.
    pub fn coefficients(&self, values: &[f64; PANEL_NODES]) -> [f64; PANEL_NODES] {
        let mut c = [0.0; PANEL_NODES];
        for (k, row) in self.proj.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..PANEL_NODES {
                s += row[i] * values[i];
            }
            c[k] = s;
        }
        c
    }

    /// Returns `(∫ g cos(ωs) ds, ∫ g sin(ωs) ds)` over `[-1, 1]` from Legendre coefficients.
    pub fn moments(coeffs: &[f64; PANEL_NODES], omega: f64) -> (f64, f64) {
        let (c, s) = Self::moments_with(coeffs, &spherical_bessel(omega.abs()));
        if omega < 0.0 {
            (c, -s)
        } else {
            (c, s)
        }
    }

    /// Moments for `ω ≥ 0` from precomputed spherical Bessel values `j_k(ω)`.
    #[inline]
    pub fn moments_with(coeffs: &[f64; PANEL_NODES], j: &[f64; PANEL_NODES]) -> (f64, f64) {
        let mut c = 0.0;
        let mut s = 0.0;
        let mut k = 0;
        while k < PANEL_NODES {
            c += coeffs[k] * j[k] - coeffs[k + 2] * j[k + 2];
            s += coeffs[k + 1] * j[k + 1] - coeffs[k + 3] * j[k + 3];
            k += 4;
        }
        (2.0 * c, 2.0 * s)
    }
}

/// Spherical Bessel functions `j_0 .. j_{PANEL_NODES-1}` at `x >= 0`.
pub fn spherical_bessel(x: f64) -> [f64; PANEL_NODES] {
    let n = PANEL_NODES;
    let mut out = [0.0; PANEL_NODES];
    if x < 1e-3 {
        // Leading two series terms: j_k(x) = x^k/(2k+1)!! (1 - x^2/(2(2k+3))).
        let mut lead = 1.0;
        for k in 0..n {
            if k > 0 {
                lead *= x / (2.0 * k as f64 + 1.0);
            }
            out[k] = lead * (1.0 - x * x / (2.0 * (2.0 * k as f64 + 3.0)));
        }
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if x > n as f64 {
        out[0] = j0;
        out[1] = j1;
        for k in 1..n - 1 {
            out[k + 1] = (2.0 * k as f64 + 1.0) / x * out[k] - out[k - 1];
        }
        return out;
    }
    // Miller's downward recurrence, normalised against whichever of j_0, j_1 is larger.
    let start = n + 20 + x as usize;
    let mut f_next = 0.0;
    let mut f_cur = 1e-300;
    let mut tmp = vec![0.0; start + 1];
    tmp[start] = f_cur;
    for k in (1..=start).rev() {
        let f_prev = (2.0 * k as f64 + 1.0) / x * f_cur - f_next;
        f_next = f_cur;
        f_cur = f_prev;
        tmp[k - 1] = f_cur;
        if f_cur.abs() > 1e250 {
            for v in tmp.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
            f_cur *= 1e-250;
            f_next *= 1e-250;
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / tmp[0] } else { j1 / tmp[1] };
    for k in 0..n {
        out[k] = tmp[k] * scale;
    }
    out
}

/// `∫_a^b f(r) cos(ω r) dr` and `∫_a^b f(r) sin(ω r) dr` on a single panel from
/// the values of `f` at the panel nodes.
pub fn panel_fourier(values: &[f64; PANEL_NODES], a: f64, b: f64, omega: f64) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let w = omega * hw;
    if w.abs() <= FILON_OMEGA {
        let rule = panel_rule();
        let mut c = 0.0;
        let mut s = 0.0;
        for i in 0..PANEL_NODES {
            let r = m + hw * rule.nodes[i];
            let (sn, cs) = (omega * r).sin_cos();
            c += rule.weights[i] * values[i] * cs;
            s += rule.weights[i] * values[i] * sn;
        }
        return (c * hw, s * hw);
    }
    let coeffs = FilonLegendre::get().coefficients(values);
    let (cm, sm) = FilonLegendre::moments(&coeffs, w);
    let (sp, cp) = (omega * m).sin_cos();
    (hw * (cp * cm - sp * sm), hw * (sp * cm + cp * sm))
}

/// Geometric panel boundaries `lo = r_0 < r_1 < ... < r_n = hi` with ratio close to `ratio`.
pub fn geometric_breaks(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && ratio > 1.0);
    let n = ((hi / lo).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (hi / lo).powf(1.0 / n as f64);
    let mut v = Vec::with_capacity(n + 1);
    let mut r = lo;
    v.push(lo);
    for _ in 1..n {
        r *= q;
        v.push(r);
    }
    v.push(hi);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let g = GaussLegendre::new(5);
        let v = g.integrate(|x| x.powi(9) + 3.0 * x.powi(4), -1.0, 2.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-12 * exact.abs());
        let w: f64 = panel_rule().weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gk_handles_smooth_and_kinked_integrands() {
        let v = adaptive_gk(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14, "exp").unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = adaptive_gk(|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-12, 1e-12, "sqrt").unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn tanh_sinh_resolves_endpoint_singularities() {
        // ∫_0^1 s^{-0.9} (1-s)^{-0.5} ds = B(0.1, 0.5)
        let v = tanh_sinh(|_, da, db| da.powf(-0.9) * db.powf(-0.5), 0.0, 1.0, 1e-12, "beta").unwrap();
        let exact = crate::scale_functions::beta_fn(0.1, 0.5).unwrap();
        assert!((v / exact - 1.0).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn spherical_bessel_matches_closed_forms() {
        for &x in &[0.5, 3.0, 17.0, 40.0] {
            let j = spherical_bessel(x);
            let (s, c) = f64::sin_cos(x);
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert!((j[0] - s / x).abs() < 1e-14);
            assert!((j[2] - j2).abs() < 1e-13, "x={x}: {} vs {}", j[2], j2);
        }
        // j_20(5) from the ascending series, which converges fast here.
        let x: f64 = 5.0;
        let mut term = x.powi(20);
        for k in 0..=20 {
            term /= (2 * k + 1) as f64;
        }
        let mut sum = 0.0;
        let mut t = term;
        for m in 0..40 {
            sum += t;
            t *= -x * x / (2.0 * (m as f64 + 1.0) * (2.0 * (m as f64 + 1.0) + 41.0));
        }
        let j = spherical_bessel(x);
        assert!((j[20] / sum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn panel_fourier_matches_closed_form() {
        // ∫_1^3 e^{-r} cos(40 r) dr
        let rule = panel_rule();
        let (a, b, w) = (1.0, 3.0, 40.0);
        let mut vals = [0.0; PANEL_NODES];
        for i in 0..PANEL_NODES {
            vals[i] = (-(2.0 + rule.nodes[i])).exp();
        }
        let (c, s) = panel_fourier(&vals, a, b, w);
        let anti = |r: f64| {
            let e = (-r as f64).exp() / (1.0 + w * w);
            (e * (w * (w * r).sin() - (w * r).cos()), e * (-(w * r).sin() - w * (w * r).cos()))
        };
        let (c3, s3) = anti(b);
        let (c1, s1) = anti(a);
        assert!((c - (c3 - c1)).abs() < 1e-14, "{c} vs {}", c3 - c1);
        assert!((s - (s3 - s1)).abs() < 1e-14, "{s} vs {}", s3 - s1);
    }
}
