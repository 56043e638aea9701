//! Scale and bound functions: φ, Φ, Φ⁻¹, θ, 𝒢, 𝒢_T, 𝒢̃, 𝒢_γ^δ and the Euler
//! beta function.
//!
//! `Φ(r) = r² / (2∫₀^r s/φ(s) ds)` for `r ≤ 1` and `Φ(1) r²` beyond, and the bound
//! function `𝒢(t, r) = min(1/(tΦ⁻¹(t)^d), θ(r))` with
//! `θ(r) = 1/(r^d Φ(r))` on `(0, 1]`, `exp(-b r^β)` for `β < 1` and
//! `r^{-d-1} exp(-b r/5)` for `β = 1` when `r > 1`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::interp::{hermite, MonotoneCubic};
use crate::quad::adaptive_gk;

/// Euler beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)` evaluated through log-gamma.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain("beta_fn", format!("arguments must be positive, got ({a}, {b})")));
    }
    Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
}

/// The scale function φ on `(0, 1]`.
#[derive(Debug, Clone)]
pub enum ScaleFunction {
    /// `φ(r) = r^α`.
    Power { alpha: f64 },
    /// User-tabulated increasing function, interpolated monotonically in log-log coordinates.
    Tabulated(Arc<TabulatedScale>),
}

/// Tabulated scale function with fitted lower-scaling constants.
#[derive(Debug)]
pub struct TabulatedScale {
    interp: MonotoneCubic,
    first_slope: f64,
    a1: f64,
    alpha1: f64,
}

/// Serializable description of a scale function.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScaleSpec {
    Power { alpha: f64 },
    Tabulated { r: Vec<f64>, phi: Vec<f64> },
}

impl ScaleFunction {
    /// Power family `φ(r) = r^α`, `0 < α < 2`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 2), got {alpha}")));
        }
        Ok(ScaleFunction::Power { alpha })
    }

    /// Tabulated family from strictly increasing samples `(r_i, φ_i)` with `max r_i = 1`.
    pub fn tabulated(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if r.len() < 3 || r.len() != phi.len() {
            return Err(Error::param("phi", "need at least three (r, phi) samples of equal length"));
        }
        if r.iter().any(|&v| v <= 0.0) || phi.iter().any(|&v| v <= 0.0) {
            return Err(Error::param("phi", "samples must be positive"));
        }
        if (r[r.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::param("r", "tabulation must end at r = 1"));
        }
        if phi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("phi", "values must be strictly increasing"));
        }
        let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = phi.iter().map(|v| v.ln()).collect();
        let slopes: Vec<f64> = (0..lx.len() - 1).map(|i| (ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i])).collect();
        let first_slope = slopes[0];
        let interp = MonotoneCubic::new(lx, ly)?;
        let alpha1 = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(alpha1 > 0.0 && alpha1 < 2.0) {
            return Err(Error::param("phi", format!("lower scaling index {alpha1} must lie in (0, 2)")));
        }
        let mut tab = TabulatedScale { interp, first_slope, a1: 1.0, alpha1 };
        let lo = r[0].ln() - 2.0;
        let n = 200;
        let mut a1: f64 = 1.0;
        for i in 0..=n {
            for j in i..=n {
                let x = (lo * (1.0 - i as f64 / n as f64)).exp();
                let y = (lo * (1.0 - j as f64 / n as f64)).exp();
                let ratio = tab.eval(y) / tab.eval(x) / (y / x).powf(alpha1);
                a1 = a1.min(ratio);
            }
        }
        tab.a1 = a1;
        Ok(ScaleFunction::Tabulated(Arc::new(tab)))
    }

    /// Builds the scale function from its serialized description.
    pub fn from_spec(spec: &ScaleSpec) -> Result<Self> {
        match spec {
            ScaleSpec::Power { alpha } => Self::power(*alpha),
            ScaleSpec::Tabulated { r, phi } => Self::tabulated(r.clone(), phi.clone()),
        }
    }

    /// `φ(r)` for `0 < r ≤ 1`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::domain("phi_eval", format!("r = {r} outside (0, 1]")));
        }
        Ok(self.eval_unchecked(r))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        match self {
            ScaleFunction::Power { alpha } => r.powf(*alpha),
            ScaleFunction::Tabulated(t) => t.eval(r),
        }
    }

    /// Lower scaling constants `(a₁, α₁)`.
    pub fn lower_scaling(&self) -> (f64, f64) {
        match self {
            ScaleFunction::Power { alpha } => (1.0, *alpha),
            ScaleFunction::Tabulated(t) => (t.a1, t.alpha1),
        }
    }
}

impl TabulatedScale {
    fn eval(&self, r: f64) -> f64 {
        let lr = r.ln();
        let x0 = self.interp.xs()[0];
        if lr < x0 {
            (self.interp.ys()[0] + self.first_slope * (lr - x0)).exp()
        } else {
            self.interp.eval(lr).exp()
        }
    }
}

/// Evaluators for Φ, Φ⁻¹, θ and the 𝒢 family bound to a model.
#[derive(Debug, Clone)]
pub struct BoundFunctions {
    d: usize,
    phi: ScaleFunction,
    b: f64,
    beta: f64,
    horizon: f64,
    c0: f64,
    phi1: f64,
    c_t: f64,
    a1: f64,
    alpha1: f64,
    cache: Arc<OnceLock<Caches>>,
}

/// Log-log cubic Hermite table of a positive function on `[top·10^{-16}, top]`.
#[derive(Debug)]
struct LogLogTable {
    log_x0: f64,
    step: f64,
    log_y: Vec<f64>,
    slope: Vec<f64>,
}

impl LogLogTable {
    /// `f` returns the value and the log-log slope at each node.
    fn build<F: Fn(f64) -> (f64, f64)>(top: f64, n: usize, f: F) -> Self {
        let step = CACHE_DECADES * std::f64::consts::LN_10 / n as f64;
        let log_x0 = top.ln() - n as f64 * step;
        let mut log_y = Vec::with_capacity(n + 1);
        let mut slope = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n { top } else { (log_x0 + i as f64 * step).exp() };
            let (y, s) = f(x);
            log_y.push(y.ln());
            slope.push(s);
        }
        LogLogTable { log_x0, step, log_y, slope }
    }

    #[inline]
    fn eval(&self, x: f64) -> Option<f64> {
        let lx = x.ln();
        let u = (lx - self.log_x0) / self.step;
        if !(u >= 0.0) {
            return None;
        }
        let i = (u as usize).min(self.log_y.len() - 2);
        let x0 = self.log_x0 + i as f64 * self.step;
        Some(hermite(x0, x0 + self.step, self.log_y[i], self.log_y[i + 1], self.slope[i], self.slope[i + 1], lx).exp())
    }
}

#[derive(Debug)]
struct Caches {
    forward: LogLogTable,
    inverse: LogLogTable,
}

const CACHE_DECADES: f64 = 16.0;
const CACHE_PER_DECADE: f64 = 64.0;

impl BoundFunctions {
    /// Builds the evaluators; `horizon` is `T`, which must satisfy `T ≥ Φ(1)`.
    pub fn new(d: usize, phi: ScaleFunction, b: f64, beta: f64, horizon: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be positive"));
        }
        if !(b > 0.0) {
            return Err(Error::param("b", format!("must be positive, got {b}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
        }
        let (a1, alpha1) = phi.lower_scaling();
        let mut bf = BoundFunctions {
            d,
            phi,
            b,
            beta,
            horizon,
            c0: 0.0,
            phi1: 0.0,
            c_t: 0.0,
            a1,
            alpha1,
            cache: Arc::new(OnceLock::new()),
        };
        bf.c0 = bf.integral_s_over_phi(1.0)?;
        bf.phi1 = 1.0 / (2.0 * bf.c0);
        if !(horizon >= bf.phi1) {
            return Err(Error::param("T", format!("horizon {horizon} must be at least Phi(1) = {}", bf.phi1)));
        }
        let rt = bf.phi_inv(horizon);
        bf.c_t = if beta < 1.0 {
            (b * rt.powf(beta)).exp() / (horizon * rt.powi(d as i32))
        } else {
            // Continuity of 𝒢_T at Φ⁻¹(T) with the r^{-d-1} e^{-br/5} tail.
            rt * (b * rt / 5.0).exp() / horizon
        };
        Ok(bf)
    }

    /// `∫₀^r s/φ(s) ds` with the substitution `s = r u^{2/(2-α₁)}`.
    fn integral_s_over_phi(&self, r: f64) -> Result<f64> {
        let p = 2.0 / (2.0 - self.alpha1);
        let phi = &self.phi;
        let v = adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let s = r * up;
                s / phi.eval_unchecked(s) * r * p * up / u
            },
            0.0,
            1.0,
            0.0,
            1e-14,
            "integral of s/phi(s)",
        )?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Quadrature { context: "integral of s/phi(s)".into(), error: f64::NAN });
        }
        Ok(v)
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// The scale function φ.
    pub fn scale(&self) -> &ScaleFunction {
        &self.phi
    }

    /// `C₀ = ∫₀¹ s/φ(s) ds`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `Φ(1) = (2C₀)⁻¹`.
    pub fn phi_one(&self) -> f64 {
        self.phi1
    }

    /// `C_T` of the 𝒢_T definition.
    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Tempering rate `b`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Tempering exponent `β`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Lower scaling constants `(a₁, α₁)`.
    pub fn lower_scaling(&self) -> (f64, f64) {
        (self.a1, self.alpha1)
    }

    /// `φ(r)` on `(0, 1]`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        self.phi.eval(r)
    }

    /// `Φ(r)` for `r > 0`.
    pub fn phi_big(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::domain("phi_big", format!("r = {r} must be positive and finite")));
        }
        if r > 1.0 {
            return Ok(self.phi1 * r * r);
        }
        if r == 1.0 {
            return Ok(self.phi1);
        }
        Ok(r * r / (2.0 * self.integral_s_over_phi(r)?))
    }

    /// `Φ(r)` from a memoized log-log Hermite table (quadrature below the table range).
    #[inline]
    pub fn phi_big_fast(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return self.phi1 * r * r;
        }
        let c = &self.caches().forward;
        c.eval(r).unwrap_or_else(|| self.phi_big(r).unwrap_or(f64::NAN))
    }

    /// `Φ⁻¹(t)` by bisection in `log r` on `(0, 1]` and closed form above `Φ(1)`.
    pub fn phi_inv(&self, t: f64) -> f64 {
        assert!(t > 0.0 && t.is_finite(), "phi_inv needs t > 0, got {t}");
        if t >= self.phi1 {
            return (t / self.phi1).sqrt();
        }
        let mut hi = 1.0f64;
        let mut lo = 0.5f64;
        while self.phi_big(lo).expect("lo > 0") >= t {
            hi = lo;
            lo *= 0.5;
        }
        let (mut llo, mut lhi) = (lo.ln(), hi.ln());
        for _ in 0..200 {
            let mid = 0.5 * (llo + lhi);
            if self.phi_big(mid.exp()).expect("mid > 0") < t {
                llo = mid;
            } else {
                lhi = mid;
            }
            if lhi - llo < 1e-15 {
                break;
            }
        }
        (0.5 * (llo + lhi)).exp()
    }

    fn caches(&self) -> &Caches {
        self.cache.get_or_init(|| {
            let n = (CACHE_DECADES * CACHE_PER_DECADE) as usize;
            // d log Φ / d log r = 2 - r²/(φ(r) ∫₀^r s/φ) = 2 - 2Φ(r)/φ(r) on (0, 1].
            let forward = LogLogTable::build(1.0, n, |r| {
                let v = self.phi_big(r).expect("r in (0, 1]");
                (v, 2.0 - 2.0 * v / self.phi.eval_unchecked(r))
            });
            let inverse = LogLogTable::build(self.phi1, n, |t| {
                let r = if t >= self.phi1 { 1.0 } else { self.phi_inv(t) };
                (r, 1.0 / (2.0 - 2.0 * t / self.phi.eval_unchecked(r)))
            });
            Caches { forward, inverse }
        })
    }

    /// `Φ⁻¹(t)` from a memoized log-log Hermite table (bisection below the table range).
    #[inline]
    pub fn phi_inv_fast(&self, t: f64) -> f64 {
        if t >= self.phi1 {
            return (t / self.phi1).sqrt();
        }
        self.caches().inverse.eval(t).unwrap_or_else(|| self.phi_inv(t))
    }

    /// θ(r) in dimension `dim`; `+∞` at `r = 0`.
    pub fn theta_dim(&self, dim: usize, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::INFINITY;
        }
        if r <= 1.0 {
            return 1.0 / (r.powi(dim as i32) * self.phi_big_fast(r));
        }
        if self.beta < 1.0 {
            (-self.b * r.powf(self.beta)).exp()
        } else {
            (-self.b * r / 5.0).exp() / r.powi(dim as i32 + 1)
        }
    }

    /// θ(r).
    pub fn theta(&self, r: f64) -> f64 {
        self.theta_dim(self.d, r)
    }

    /// On-diagonal rate `1/(tΦ⁻¹(t)^dim)`.
    #[inline]
    pub fn diag_dim(&self, dim: usize, t: f64) -> f64 {
        1.0 / (t * self.phi_inv_fast(t).powi(dim as i32))
    }

    /// 𝒢(t, r) in dimension `dim`.
    pub fn g_dim(&self, dim: usize, t: f64, r: f64) -> f64 {
        self.diag_dim(dim, t).min(self.theta_dim(dim, r.abs()))
    }

    /// 𝒢(t, r) = min(1/(tΦ⁻¹(t)^d), θ(r)).
    pub fn g(&self, t: f64, r: f64) -> f64 {
        self.g_dim(self.d, t, r)
    }

    /// 𝒢_T(t, r); requires `0 < t ≤ T`.
    pub fn g_t(&self, t: f64, r: f64) -> Result<f64> {
        if !(t > 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::domain("gt_eval", format!("t = {t} outside (0, T]")));
        }
        let r = r.abs();
        let d = self.d as i32;
        let rt = self.phi_inv_fast(t);
        let rh = self.phi_inv_fast(self.horizon);
        Ok(if r <= rt {
            1.0 / (t * rt.powi(d))
        } else if r <= rh {
            1.0 / (r.powi(d) * self.phi_big_fast(r))
        } else if self.beta < 1.0 {
            self.c_t * (-self.b * r.powf(self.beta)).exp()
        } else {
            self.c_t * (-self.b * r / 5.0).exp() / r.powi(d + 1)
        })
    }

    /// 𝒢̃(t, r) = min(1/(tΦ⁻¹(t)^d), 1/(r^dΦ(r))).
    pub fn g_tilde(&self, t: f64, r: f64) -> f64 {
        let r = r.abs();
        let tail = if r == 0.0 { f64::INFINITY } else { 1.0 / (r.powi(self.d as i32) * self.phi_big_fast(r)) };
        self.diag_dim(self.d, t).min(tail)
    }

    /// 𝒢_γ^δ(t, r) = Φ⁻¹(t)^γ (r^δ ∧ 1) 𝒢(t, r).
    pub fn g_gamma_delta(&self, gamma: f64, delta: f64, t: f64, r: f64) -> f64 {
        let r = r.abs();
        self.phi_inv_fast(t).powf(gamma) * r.powf(delta).min(1.0) * self.g(t, r)
    }

    /// 𝒢̃_γ^δ(t, r) = Φ⁻¹(t)^γ (r^δ ∧ 1) 𝒢̃(t, r).
    pub fn g_tilde_gamma_delta(&self, gamma: f64, delta: f64, t: f64, r: f64) -> f64 {
        let r = r.abs();
        self.phi_inv_fast(t).powf(gamma) * r.powf(delta).min(1.0) * self.g_tilde(t, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(alpha: f64, beta: f64) -> BoundFunctions {
        BoundFunctions::new(1, ScaleFunction::power(alpha).unwrap(), 1.0, beta, 1.0).unwrap()
    }

    static SHARED_HALF: std::sync::LazyLock<BoundFunctions> = std::sync::LazyLock::new(|| bounds(1.2, 0.5));
    static SHARED_ONE: std::sync::LazyLock<BoundFunctions> = std::sync::LazyLock::new(|| bounds(1.2, 1.0));

    /// Closed-form oracle for the power family: Φ(r) = (2-α) r^α / 2 on (0, 1].
    fn phi_big_oracle(alpha: f64, r: f64) -> f64 {
        let phi1 = (2.0 - alpha) / 2.0;
        if r <= 1.0 {
            phi1 * r.powf(alpha)
        } else {
            phi1 * r * r
        }
    }

    #[test]
    fn phi_eval_examples() {
        let s = ScaleFunction::power(1.2).unwrap();
        assert!((s.eval(0.5).unwrap() - 0.435_275_281_648_062).abs() < 1e-12);
        assert_eq!(s.eval(1.0).unwrap(), 1.0);
        assert!(s.eval(0.0).is_err());
        assert!(s.eval(1.5).is_err());
    }

    #[test]
    fn phi_big_examples() {
        let b = bounds(1.0, 0.5);
        assert!((b.phi_big(0.5).unwrap() - 0.25).abs() < 1e-14);
        assert!((b.phi_big(2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((b.phi_one() - 0.5).abs() < 1e-14);
        let b = bounds(1.2, 0.5);
        assert!((b.phi_one() - 0.4).abs() < 1e-14);
        for &r in &[1e-6, 0.01, 0.3, 0.999, 1.0, 1.5, 7.0] {
            let v = b.phi_big(r).unwrap();
            assert!((v / phi_big_oracle(1.2, r) - 1.0).abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn phi_inv_examples() {
        let b = bounds(1.0, 0.5);
        assert!((b.phi_inv(0.25) - 0.5).abs() < 1e-12);
        assert!((b.phi_inv_fast(0.25) - 0.5).abs() < 1e-12);
        let b = bounds(1.2, 0.5);
        for &t in &[1e-9f64, 1e-4, 0.05, 0.4, 1.0] {
            let oracle = if t <= 0.4 { (t / 0.4).powf(1.0 / 1.2) } else { (t / 0.4).sqrt() };
            assert!((b.phi_inv(t) / oracle - 1.0).abs() < 1e-12, "t={t}");
            assert!((b.phi_inv_fast(t) / oracle - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn theta_examples() {
        let b = bounds(1.0, 0.5);
        assert!((b.theta(0.5) - 8.0).abs() < 1e-12);
        assert!((b.theta(4.0) - 0.135_335_283_236_612_7).abs() < 1e-14);
        let b1 = bounds(1.0, 1.0);
        assert!((b1.theta(2.0) - 0.167_580_011_508_909_83).abs() < 1e-14);
        assert!(b.theta(0.0).is_infinite());
    }

    #[test]
    fn g_examples() {
        let b = bounds(1.0, 0.5);
        assert!((b.g(0.25, 0.0) - 8.0).abs() < 1e-11);
        for &(t, r) in &[(0.1, 0.3), (0.7, 0.9), (0.01, 1.0)] {
            assert!((b.g(t, r) - b.g_tilde(t, r)).abs() < 1e-12 * b.g(t, r));
            assert_eq!(b.g_gamma_delta(0.0, 0.0, t, r), b.g(t, r));
        }
        assert!(b.g_t(1.5, 0.1).is_err());
    }

    #[test]
    fn g_t_is_continuous_at_the_horizon_radius() {
        for &beta in &[0.5, 1.0] {
            let b = bounds(1.2, beta);
            let rh = b.phi_inv(1.0);
            let left = b.g_t(0.1, rh * (1.0 - 1e-12)).unwrap();
            let right = b.g_t(0.1, rh * (1.0 + 1e-12)).unwrap();
            assert!((left / right - 1.0).abs() < 1e-9, "beta={beta}: {left} vs {right}");
        }
    }

    #[test]
    fn beta_examples() {
        assert!((beta_fn(1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_fn(2.0, 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        assert!(beta_fn(0.0, 1.0).is_err());
        assert!(beta_fn(1.0, -2.0).is_err());
    }

    #[test]
    fn tabulated_power_matches_power_family() {
        let r: Vec<f64> = (0..=40).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect();
        let phi: Vec<f64> = r.iter().map(|v| v.powf(1.2)).collect();
        let tab = ScaleFunction::tabulated(r, phi).unwrap();
        let (a1, alpha1) = tab.lower_scaling();
        assert!((alpha1 - 1.2).abs() < 1e-9 && (a1 - 1.0).abs() < 1e-9);
        let bt = BoundFunctions::new(1, tab, 1.0, 0.5, 1.0).unwrap();
        let bp = bounds(1.2, 0.5);
        for &x in &[1e-5, 0.01, 0.3, 0.9] {
            assert!((bt.phi_big(x).unwrap() / bp.phi_big(x).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn phi_big_is_strictly_increasing(r1 in 1e-6f64..3.0, f in 1.0001f64..3.0) {
            let b = bounds(1.2, 0.5);
            prop_assert!(b.phi_big(r1).unwrap() < b.phi_big(r1 * f).unwrap());
        }

        #[test]
        fn phi_inverse_round_trip(r in 1e-6f64..5.0) {
            let b = &*SHARED_HALF;
            let t = b.phi_big(r).unwrap();
            prop_assert!((b.phi_inv(t) / r - 1.0).abs() < 1e-10);
            prop_assert!((b.phi_inv_fast(t) / r - 1.0).abs() < 1e-10);
        }

        #[test]
        fn beta_is_symmetric(a in 0.01f64..20.0, c in 0.01f64..20.0) {
            let x = beta_fn(a, c).unwrap();
            let y = beta_fn(c, a).unwrap();
            prop_assert!((x / y - 1.0).abs() < 1e-13);
        }

        #[test]
        fn g_is_non_increasing_in_r(t in 1e-4f64..1.0, r in 0.0f64..10.0, dr in 0.0f64..2.0) {
            for b in [&*SHARED_HALF, &*SHARED_ONE] {
                prop_assert!(b.g(t, r + dr) <= b.g(t, r) * (1.0 + 1e-12));
                prop_assert!(b.g_t(t, r + dr).unwrap() <= b.g_t(t, r).unwrap() * (1.0 + 1e-12));
            }
        }
    }
}
