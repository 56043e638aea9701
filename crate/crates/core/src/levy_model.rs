//! Jump kernels, coefficients κ and 𝔎, and Fourier-side objects: the
//! characteristic exponent ψ, the Pruitt function 𝒫, the auxiliary scale
//! `varphi` and the (d+2)-dimensional kernel ν₁.
//!
//! In dimension one the exponent of the symmetric kernel `𝔎(z)J(|z|)` is
//! `ψ(ξ) = ∫ (1 - cos ξz) 𝔎(z) J(|z|) dz = 2∫₀^∞ 2sin²(ξr/2) 𝔎(r) J(r) dr`;
//! the half-angle form avoids cancellation for small `ξr`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{hermite, hermite_derivative};
use crate::quad::{adaptive_gk, geometric_breaks, panel_fourier, panel_rule, FILON_OMEGA, PANEL_NODES};
use crate::scale_functions::{BoundFunctions, ScaleFunction};

/// Radial jump kernel `J` with its derivative.
pub trait JumpKernel: Send + Sync + fmt::Debug {
    /// `J(r)` for `r > 0`.
    fn j(&self, r: f64) -> f64;
    /// `J'(r)` for `r > 0`.
    fn dj(&self, r: f64) -> f64;
    /// Exponent `α` with `J(r) ≍ r^{-1-α}` as `r → 0` in dimension one; drives
    /// the endpoint substitution of the quadratures.
    fn small_exponent(&self) -> f64;
    /// Radius beyond which every `J`-weighted moment used here is negligible.
    fn cutoff_radius(&self) -> f64;
}

/// Tempered stable kernel `J(r) = r^{-d-α} e^{-b r^β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedStable {
    pub d: usize,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
}

impl JumpKernel for TemperedStable {
    #[inline]
    fn j(&self, r: f64) -> f64 {
        r.powf(-(self.d as f64) - self.alpha) * (-self.b * r.powf(self.beta)).exp()
    }

    #[inline]
    fn dj(&self, r: f64) -> f64 {
        let d = self.d as f64;
        -self.j(r) * ((d + self.alpha) / r + self.b * self.beta * r.powf(self.beta - 1.0))
    }

    fn small_exponent(&self) -> f64 {
        self.alpha
    }

    fn cutoff_radius(&self) -> f64 {
        (60.0 / self.b).powf(1.0 / self.beta).max(60.0)
    }
}

/// Model parameters: dimension, stability index, tempering and horizon.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub d: usize,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    /// Comparability constant of the jump kernel; defaults to `e^b`.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { d: 1, alpha: 1.2, b: 1.0, beta: 0.5, a: None, horizon: 1.0 }
    }
}

impl ModelSpec {
    /// Checks parameter ranges, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("d", "dimension must be a positive integer"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::param("b", format!("must be positive, got {}", self.b)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        if let Some(a) = self.a {
            if !(a >= 1.0) {
                return Err(Error::param("a", format!("must be at least 1, got {a}")));
            }
        }
        if !(self.horizon >= 1.0 && self.horizon.is_finite()) {
            return Err(Error::param("T", format!("horizon must be at least 1, got {}", self.horizon)));
        }
        Ok(())
    }

    /// Comparability constant `a` (default `e^b`).
    pub fn a(&self) -> f64 {
        self.a.unwrap_or(self.b.exp())
    }

    /// The built-in tempered stable kernel.
    pub fn jump(&self) -> TemperedStable {
        TemperedStable { d: self.d, alpha: self.alpha, b: self.b, beta: self.beta }
    }

    /// The matching power scale function `φ(r) = r^α`.
    pub fn scale(&self) -> Result<ScaleFunction> {
        ScaleFunction::power(self.alpha)
    }

    /// Bound functions for this model.
    pub fn bounds(&self) -> Result<BoundFunctions> {
        self.validate()?;
        BoundFunctions::new(self.d, self.scale()?, self.b, self.beta, self.horizon)
    }
}

/// x-dependent coefficient of a separable κ term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `amplitude · cos(frequency · x)`.
    Cosine { amplitude: f64, frequency: f64 },
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Cosine { amplitude, frequency } => amplitude * (frequency * x).cos(),
        }
    }
}

/// The non-symmetric coefficient κ(x, z).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaSpec {
    /// `κ ≡ value`.
    Constant { value: f64 },
    /// `κ(x, z) = mean + amplitude · cos(frequency · x)`.
    Cosine { mean: f64, amplitude: f64, frequency: f64 },
    /// `κ(x, z) = mean + amplitude · cos(frequency · x) · exp(-z²/width²)`.
    CosineBump { mean: f64, amplitude: f64, frequency: f64, width: f64 },
}

impl Default for KappaSpec {
    fn default() -> Self {
        KappaSpec::Cosine { mean: 1.0, amplitude: 0.3, frequency: 1.0 }
    }
}

impl KappaSpec {
    /// Checks ellipticity and parameter ranges, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("kappa.{name}"), format!("must be positive, got {v}")))
            }
        };
        match *self {
            KappaSpec::Constant { value } => positive("value", value),
            KappaSpec::Cosine { mean, amplitude, frequency } => {
                positive("frequency", frequency)?;
                if !(amplitude.abs() < mean) {
                    return Err(Error::param("kappa.amplitude", "|amplitude| must be smaller than mean"));
                }
                Ok(())
            }
            KappaSpec::CosineBump { mean, amplitude, frequency, width } => {
                positive("frequency", frequency)?;
                positive("width", width)?;
                if !(amplitude.abs() < mean) {
                    return Err(Error::param("kappa.amplitude", "|amplitude| must be smaller than mean"));
                }
                Ok(())
            }
        }
    }

    /// κ(x, z).
    #[inline]
    pub fn eval(&self, x: f64, z: f64) -> f64 {
        match *self {
            KappaSpec::Constant { value } => value,
            KappaSpec::Cosine { mean, amplitude, frequency } => mean + amplitude * (frequency * x).cos(),
            KappaSpec::CosineBump { mean, amplitude, frequency, width } => {
                mean + amplitude * (frequency * x).cos() * (-(z / width).powi(2)).exp()
            }
        }
    }

    /// Ellipticity bounds `(κ₀, κ₁)`.
    pub fn ellipticity(&self) -> (f64, f64) {
        match *self {
            KappaSpec::Constant { value } => (value, value),
            KappaSpec::Cosine { mean, amplitude, .. } | KappaSpec::CosineBump { mean, amplitude, .. } => {
                (mean - amplitude.abs(), mean + amplitude.abs())
            }
        }
    }

    /// Hölder data `(κ₂, δ)` with `|κ(x,z) - κ(y,z)| ≤ κ₂ |x - y|^δ`.
    pub fn holder(&self) -> (f64, f64) {
        match *self {
            KappaSpec::Constant { .. } => (0.0, 1.0),
            KappaSpec::Cosine { amplitude, frequency, .. } | KappaSpec::CosineBump { amplitude, frequency, .. } => {
                (amplitude.abs() * frequency, 1.0)
            }
        }
    }

    /// Spatial period of `x ↦ κ(x, ·)`; `None` when κ does not depend on `x`.
    pub fn period(&self) -> Option<f64> {
        match *self {
            KappaSpec::Constant { .. } => None,
            KappaSpec::Cosine { frequency, .. } | KappaSpec::CosineBump { frequency, .. } => {
                Some(2.0 * std::f64::consts::PI / frequency)
            }
        }
    }

    /// Separable form `κ(x, z) = Σ a_i(x) k_i(z)`.
    pub fn separable(&self) -> Vec<(Coefficient, FreezeKernel)> {
        match *self {
            KappaSpec::Constant { value } => vec![(Coefficient::Constant(value), FreezeKernel::Constant(1.0))],
            KappaSpec::Cosine { mean, amplitude, frequency } => vec![
                (Coefficient::Constant(mean), FreezeKernel::Constant(1.0)),
                (Coefficient::Cosine { amplitude, frequency }, FreezeKernel::Constant(1.0)),
            ],
            KappaSpec::CosineBump { mean, amplitude, frequency, width } => vec![
                (Coefficient::Constant(mean), FreezeKernel::Constant(1.0)),
                (
                    Coefficient::Cosine { amplitude, frequency },
                    FreezeKernel::Gaussian { base: 0.0, amplitude: 1.0, width },
                ),
            ],
        }
    }

    /// Whether κ(x, z) = a(x) k(z) with a single profile, so that every frozen
    /// kernel is a scalar multiple of one reference kernel.
    pub fn is_factorized(&self) -> bool {
        matches!(self, KappaSpec::Constant { .. } | KappaSpec::Cosine { .. })
    }

    /// Scalar multiplier `a(y)` of the reference profile for factorized κ.
    pub fn factor(&self, y: f64) -> f64 {
        self.eval(y, 0.0)
    }

    /// Frozen kernel `𝔎_y(z) = κ(y, z)`.
    pub fn freeze(&self, y: f64) -> FreezeKernel {
        FreezeKernel::Frozen { kappa: self.clone(), anchor: y }
    }
}

/// Symmetric coefficient 𝔎(z) of a translation-invariant operator.
#[derive(Clone)]
pub enum FreezeKernel {
    Constant(f64),
    /// `base + amplitude · exp(-z²/width²)`.
    Gaussian { base: f64, amplitude: f64, width: f64 },
    /// `base + amplitude / (1 + (z/width)²)`.
    Lorentzian { base: f64, amplitude: f64, width: f64 },
    /// `𝔎(z) = κ(anchor, z)`.
    Frozen { kappa: KappaSpec, anchor: f64 },
    /// User-supplied even function with its bounds `(inf, sup)`.
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, bounds: (f64, f64), label: String },
}

impl fmt::Debug for FreezeKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreezeKernel::Constant(c) => write!(f, "Constant({c})"),
            FreezeKernel::Gaussian { base, amplitude, width } => {
                write!(f, "Gaussian(base={base}, amplitude={amplitude}, width={width})")
            }
            FreezeKernel::Lorentzian { base, amplitude, width } => {
                write!(f, "Lorentzian(base={base}, amplitude={amplitude}, width={width})")
            }
            FreezeKernel::Frozen { kappa, anchor } => write!(f, "Frozen({kappa:?} at y={anchor})"),
            FreezeKernel::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl FreezeKernel {
    /// 𝔎(z).
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            FreezeKernel::Constant(c) => *c,
            FreezeKernel::Gaussian { base, amplitude, width } => base + amplitude * (-(z / width).powi(2)).exp(),
            FreezeKernel::Lorentzian { base, amplitude, width } => base + amplitude / (1.0 + (z / width).powi(2)),
            FreezeKernel::Frozen { kappa, anchor } => kappa.eval(*anchor, z),
            FreezeKernel::Custom { f, .. } => f(z),
        }
    }

    /// `(inf 𝔎, sup 𝔎)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            FreezeKernel::Constant(c) => (*c, *c),
            FreezeKernel::Gaussian { base, amplitude, .. } | FreezeKernel::Lorentzian { base, amplitude, .. } => {
                (base.min(base + amplitude), base.max(base + amplitude))
            }
            FreezeKernel::Frozen { kappa, anchor } => match kappa {
                KappaSpec::CosineBump { mean, amplitude, frequency, .. } => {
                    let c = amplitude * (frequency * anchor).cos();
                    (mean.min(mean + c), mean.max(mean + c))
                }
                _ => {
                    let v = kappa.eval(*anchor, 0.0);
                    (v, v)
                }
            },
            FreezeKernel::Custom { bounds, .. } => *bounds,
        }
    }

    /// Length scale `(width, extent)` of the z-variation, used to cap quadrature panels.
    fn feature(&self) -> Option<(f64, f64)> {
        match self {
            FreezeKernel::Constant(_) => None,
            FreezeKernel::Gaussian { width, .. } => Some((*width, 8.0 * width)),
            FreezeKernel::Lorentzian { width, .. } => Some((*width, 50.0 * width)),
            FreezeKernel::Frozen { kappa, .. } => match kappa {
                KappaSpec::CosineBump { width, .. } => Some((*width, 8.0 * width)),
                _ => None,
            },
            FreezeKernel::Custom { .. } => Some((0.25, 20.0)),
        }
    }

    /// `𝔎 + c`.
    pub fn shifted(&self, c: f64) -> FreezeKernel {
        match self {
            FreezeKernel::Constant(v) => FreezeKernel::Constant(v + c),
            FreezeKernel::Gaussian { base, amplitude, width } => {
                FreezeKernel::Gaussian { base: base + c, amplitude: *amplitude, width: *width }
            }
            FreezeKernel::Lorentzian { base, amplitude, width } => {
                FreezeKernel::Lorentzian { base: base + c, amplitude: *amplitude, width: *width }
            }
            other => {
                let inner = other.clone();
                let (lo, hi) = other.bounds();
                FreezeKernel::Custom {
                    f: Arc::new(move |z| inner.eval(z) + c),
                    bounds: (lo + c, hi + c),
                    label: format!("{other:?} + {c}"),
                }
            }
        }
    }

    /// Whether 𝔎 is constant, so that its exponent is a multiple of the unit exponent.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            FreezeKernel::Constant(c) => Some(*c),
            FreezeKernel::Frozen { kappa, anchor } if kappa.is_factorized() => Some(kappa.factor(*anchor)),
            _ => None,
        }
    }
}

/// Moments `∫_ℝ |z|^k 𝔎(z) J(|z|) dz` for even `k ≥ 2`.
pub fn moment(k: &FreezeKernel, jump: &dyn JumpKernel, order: i32) -> Result<f64> {
    let alpha = jump.small_exponent();
    let inner = 1.0f64;
    let p = 2.0 / (2.0 - alpha);
    let head = adaptive_gk(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let up = u.powf(p);
            let r = inner * up;
            r.powi(order) * k.eval(r) * jump.j(r) * inner * p * up / u
        },
        0.0,
        1.0,
        0.0,
        1e-14,
        "moment head",
    )?;
    let tail = radial_integral(|r| r.powi(order) * k.eval(r) * jump.j(r), inner, jump.cutoff_radius() * 4.0)?;
    Ok(2.0 * (head + tail))
}

/// `∫_lo^hi g(r) dr` for a smooth positive-axis integrand, on geometric panels.
pub fn radial_integral<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let breaks = geometric_breaks(lo, hi, 2.0);
    let mut s = 0.0;
    for w in breaks.windows(2) {
        s += adaptive_gk(&g, w[0], w[1], 1e-300, 1e-13, "radial integral")?;
    }
    Ok(s)
}

/// Direct quadrature of `(ψ(ξ), ψ'(ξ))` for the kernel `𝔎(z)J(|z|)` in dimension one.
pub fn psi_direct(k: &FreezeKernel, jump: &dyn JumpKernel, xi: f64) -> Result<(f64, f64)> {
    let xi = xi.abs();
    if xi == 0.0 {
        return Ok((0.0, 0.0));
    }
    let alpha = jump.small_exponent();
    let p = 2.0 / (2.0 - alpha);
    let r_in = (0.5 / xi).min(1.0);
    let f = |r: f64| k.eval(r) * jump.j(r);
    // Inner part: r = r_in u^p removes the r^{1-α} endpoint behaviour.
    let head_psi = adaptive_gk(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let up = u.powf(p);
            let r = r_in * up;
            let s = (0.5 * xi * r).sin();
            2.0 * s * s * f(r) * r_in * p * up / u
        },
        0.0,
        1.0,
        0.0,
        1e-14,
        "psi head",
    )
    .map_err(|e| annotate(e, xi))?;
    let head_dpsi = adaptive_gk(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let up = u.powf(p);
            let r = r_in * up;
            r * (xi * r).sin() * f(r) * r_in * p * up / u
        },
        0.0,
        1.0,
        0.0,
        1e-14,
        "psi derivative head",
    )
    .map_err(|e| annotate(e, xi))?;
    let r_max = jump.cutoff_radius();
    let mut breaks = geometric_breaks(r_in, r_max.max(2.0 * r_in), 1.3);
    if let Some((width, extent)) = k.feature() {
        let cap = 0.5 * width;
        let mut refined = vec![breaks[0]];
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a < extent && b - a > cap {
                let n = ((b - a) / cap).ceil() as usize;
                for i in 1..n {
                    refined.push(a + (b - a) * i as f64 / n as f64);
                }
            }
            refined.push(b);
        }
        breaks = refined;
    }
    let rule = panel_rule();
    let mut psi = head_psi;
    let mut dpsi = head_dpsi;
    let mut vals = [0.0; PANEL_NODES];
    let mut rvals = [0.0; PANEL_NODES];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        for i in 0..PANEL_NODES {
            let r = m + hw * rule.nodes[i];
            vals[i] = f(r);
            rvals[i] = r * vals[i];
        }
        if xi * hw <= FILON_OMEGA {
            let mut sp = 0.0;
            let mut sd = 0.0;
            for i in 0..PANEL_NODES {
                let r = m + hw * rule.nodes[i];
                let s = (0.5 * xi * r).sin();
                sp += rule.weights[i] * 2.0 * s * s * vals[i];
                sd += rule.weights[i] * (xi * r).sin() * rvals[i];
            }
            psi += sp * hw;
            dpsi += sd * hw;
        } else {
            let plain: f64 = (0..PANEL_NODES).map(|i| rule.weights[i] * vals[i]).sum::<f64>() * hw;
            let (c, _) = panel_fourier(&vals, a, b, xi);
            let (_, s) = panel_fourier(&rvals, a, b, xi);
            psi += plain - c;
            dpsi += s;
        }
    }
    if !psi.is_finite() || !dpsi.is_finite() {
        return Err(Error::Quadrature { context: format!("psi at xi = {xi}"), error: f64::NAN });
    }
    Ok((2.0 * psi, 2.0 * dpsi))
}

fn annotate(e: Error, xi: f64) -> Error {
    match e {
        Error::Quadrature { context, error } => Error::Quadrature { context: format!("{context} at xi = {xi}"), error },
        other => other,
    }
}

/// Tabulated exponent ψ of one symmetric kernel on a log-uniform frequency grid.
///
/// Values are interpolated by cubic Hermite segments in `(log ξ, log ψ)` using
/// the exact log-log slopes `ξψ'/ψ`; below the grid the even moment series is
/// used and above it the direct quadrature.
pub struct PsiTable {
    kernel: FreezeKernel,
    jump: Arc<dyn JumpKernel>,
    log_lo: f64,
    step: f64,
    log_psi: Vec<f64>,
    slope: Vec<f64>,
    m2: f64,
    m4: f64,
    m6: f64,
    max_interp_error: f64,
}

impl fmt::Debug for PsiTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiTable")
            .field("kernel", &self.kernel)
            .field("nodes", &self.log_psi.len())
            .field("max_interp_error", &self.max_interp_error)
            .finish()
    }
}

/// Lower end of the tabulated frequency range.
pub const PSI_TABLE_LO: f64 = 1e-4;
/// Upper end of the tabulated frequency range.
pub const PSI_TABLE_HI: f64 = 1e7;

impl PsiTable {
    /// Tabulates ψ for `𝔎(z)J(|z|)`, refining until the midpoint check passes `tol`.
    pub fn build(kernel: FreezeKernel, jump: Arc<dyn JumpKernel>, tol: f64) -> Result<Self> {
        let m2 = moment(&kernel, jump.as_ref(), 2)?;
        let m4 = moment(&kernel, jump.as_ref(), 4)?;
        let m6 = moment(&kernel, jump.as_ref(), 6)?;
        let log_lo = PSI_TABLE_LO.ln();
        let span = PSI_TABLE_HI.ln() - log_lo;
        let mut per_decade = 100usize;
        loop {
            let n = (span / std::f64::consts::LN_10 * per_decade as f64).round() as usize;
            let step = span / n as f64;
            let mut log_psi = Vec::with_capacity(n + 1);
            let mut slope = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let xi = (log_lo + i as f64 * step).exp();
                let (v, d) = psi_direct(&kernel, jump.as_ref(), xi)?;
                if !(v > 0.0) {
                    return Err(Error::Quadrature { context: format!("non-positive psi at xi = {xi}"), error: v });
                }
                log_psi.push(v.ln());
                slope.push(xi * d / v);
            }
            let mut table = PsiTable {
                kernel: kernel.clone(),
                jump: jump.clone(),
                log_lo,
                step,
                log_psi,
                slope,
                m2,
                m4,
                m6,
                max_interp_error: 0.0,
            };
            let mut worst: f64 = 0.0;
            for i in (0..n).step_by(7) {
                let xi = (log_lo + (i as f64 + 0.5) * step).exp();
                let (exact, _) = psi_direct(&kernel, jump.as_ref(), xi)?;
                worst = worst.max((table.eval(xi) / exact - 1.0).abs());
            }
            table.max_interp_error = worst;
            if worst <= tol || per_decade >= 800 {
                return Ok(table);
            }
            per_decade *= 2;
        }
    }

    /// The kernel this table represents.
    pub fn kernel(&self) -> &FreezeKernel {
        &self.kernel
    }

    /// Largest relative interpolation error observed at the validation midpoints.
    pub fn max_interp_error(&self) -> f64 {
        self.max_interp_error
    }

    /// Second moment `∫ z² 𝔎(z) J(|z|) dz`.
    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    /// ψ(ξ).
    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        self.eval_with_derivative(xi).0
    }

    /// `(ψ(ξ), ψ'(ξ))`.
    #[inline]
    pub fn eval_with_derivative(&self, xi: f64) -> (f64, f64) {
        let xi = xi.abs();
        if xi < PSI_TABLE_LO {
            let x2 = xi * xi;
            let v = x2 * (0.5 * self.m2 - x2 * (self.m4 / 24.0 - x2 * self.m6 / 720.0));
            let d = xi * (self.m2 - x2 * (self.m4 / 6.0 - x2 * self.m6 / 120.0));
            return (v, d);
        }
        let lx = xi.ln();
        let u = (lx - self.log_lo) / self.step;
        let n = self.log_psi.len() - 1;
        if u >= n as f64 {
            if u <= n as f64 + 1e-9 {
                let v = self.log_psi[n].exp();
                return (v, v * self.slope[n] / xi);
            }
            return psi_direct(&self.kernel, self.jump.as_ref(), xi).unwrap_or((f64::NAN, f64::NAN));
        }
        let i = u as usize;
        let x0 = self.log_lo + i as f64 * self.step;
        let x1 = x0 + self.step;
        let (y0, y1, s0, s1) = (self.log_psi[i], self.log_psi[i + 1], self.slope[i], self.slope[i + 1]);
        let ly = hermite(x0, x1, y0, y1, s0, s1, lx);
        let v = ly.exp();
        let dly = hermite_derivative(x0, x1, y0, y1, s0, s1, lx);
        (v, v * dly / xi)
    }
}

/// Linear combination `Σ c_i ψ_i` of tabulated exponents.
#[derive(Debug, Clone)]
pub struct Symbol {
    terms: Vec<(f64, Arc<PsiTable>)>,
}

impl Symbol {
    pub fn new(terms: Vec<(f64, Arc<PsiTable>)>) -> Self {
        Symbol { terms }
    }

    /// Exponent of `c · 𝔎` for a single table.
    pub fn scaled(table: Arc<PsiTable>, c: f64) -> Self {
        Symbol { terms: vec![(c, table)] }
    }

    /// `c · self`.
    pub fn times(&self, c: f64) -> Self {
        Symbol { terms: self.terms.iter().map(|(a, t)| (a * c, t.clone())).collect() }
    }

    /// Terms of the combination.
    pub fn terms(&self) -> &[(f64, Arc<PsiTable>)] {
        &self.terms
    }

    /// Sum of the two symbols.
    pub fn plus(&self, other: &Symbol) -> Symbol {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Symbol { terms }
    }

    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        self.terms.iter().map(|(c, t)| c * t.eval(xi)).sum()
    }

    #[inline]
    pub fn eval_with_derivative(&self, xi: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (c, t) in &self.terms {
            let (a, b) = t.eval_with_derivative(xi);
            v += c * a;
            d += c * b;
        }
        (v, d)
    }

    /// Smallest `ξ` with `s ψ(ξ) ≥ level` (ψ is increasing on the tabulated range).
    pub fn level_crossing(&self, s: f64, level: f64) -> f64 {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while s * self.eval(hi) < level {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if s * self.eval(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi {
                break;
            }
        }
        hi
    }
}

/// A model with its jump kernel, bound functions and cached exponent tables.
#[derive(Debug, Clone)]
pub struct LevyModel {
    spec: ModelSpec,
    jump: Arc<dyn JumpKernel>,
    bounds: BoundFunctions,
    unit: Arc<OnceLock<Arc<PsiTable>>>,
}

/// Relative interpolation tolerance for exponent tables.
pub const PSI_TABLE_TOL: f64 = 1e-8;

impl LevyModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let bounds = spec.bounds()?;
        let jump: Arc<dyn JumpKernel> = Arc::new(spec.jump());
        Ok(LevyModel { spec, jump, bounds, unit: Arc::new(OnceLock::new()) })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &BoundFunctions {
        &self.bounds
    }

    pub fn jump(&self) -> &Arc<dyn JumpKernel> {
        &self.jump
    }

    /// `J(r)`.
    pub fn j_eval(&self, r: f64) -> f64 {
        self.jump.j(r)
    }

    /// Exponent table of `𝔎 ≡ 1`.
    pub fn unit_table(&self) -> Result<Arc<PsiTable>> {
        if let Some(t) = self.unit.get() {
            return Ok(t.clone());
        }
        let t = Arc::new(PsiTable::build(FreezeKernel::Constant(1.0), self.jump.clone(), PSI_TABLE_TOL)?);
        Ok(self.unit.get_or_init(|| t).clone())
    }

    /// Exponent table of an arbitrary 𝔎.
    pub fn table(&self, k: &FreezeKernel) -> Result<Arc<PsiTable>> {
        Ok(Arc::new(PsiTable::build(k.clone(), self.jump.clone(), PSI_TABLE_TOL)?))
    }

    /// Symbol `ψ_𝔎`, sharing the unit table whenever 𝔎 is constant.
    pub fn symbol(&self, k: &FreezeKernel) -> Result<Symbol> {
        if let Some(c) = k.constant_value() {
            return Ok(Symbol::scaled(self.unit_table()?, c));
        }
        if let FreezeKernel::Frozen { kappa, anchor } = k {
            let mut terms = Vec::new();
            for (coef, profile) in kappa.separable() {
                let c = coef.eval(*anchor);
                let table = match profile.constant_value() {
                    Some(v) => {
                        terms.push((c * v, self.unit_table()?));
                        continue;
                    }
                    None => self.table(&profile)?,
                };
                terms.push((c, table));
            }
            return Ok(Symbol::new(terms));
        }
        Ok(Symbol::scaled(self.table(k)?, 1.0))
    }

    /// ψ_𝔎(ξ) by direct quadrature.
    pub fn psi_eval(&self, xi: f64, k: &FreezeKernel) -> Result<f64> {
        Ok(psi_direct(k, self.jump.as_ref(), xi)?.0)
    }

    /// Pruitt function `𝒫(r) = ∫ (1 ∧ |y|²/r²) J(|y|) dy`.
    pub fn pruitt_eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain("pruitt_eval", format!("r = {r} must be positive")));
        }
        let j = self.jump.as_ref();
        let p = 2.0 / (2.0 - j.small_exponent());
        let head = adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let s = r * up;
                (s / r).powi(2) * j.j(s) * r * p * up / u
            },
            0.0,
            1.0,
            0.0,
            1e-13,
            "pruitt head",
        )?;
        let tail = radial_integral(|s| j.j(s), r, j.cutoff_radius().max(2.0 * r))?;
        Ok(2.0 * (head + tail))
    }

    /// `varphi(r) = r² / ∫₀^r s^{d+1} J(s) ds` for `r ≤ 1`, `varphi(1) r²` beyond.
    pub fn varphi_eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain("varphi_eval", format!("r = {r} must be positive")));
        }
        let rr = r.min(1.0);
        let j = self.jump.as_ref();
        let d = self.spec.d as i32;
        let p = 2.0 / (2.0 - j.small_exponent());
        let integral = adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let s = rr * up;
                s.powi(d + 1) * j.j(s) * rr * p * up / u
            },
            0.0,
            1.0,
            0.0,
            1e-14,
            "varphi",
        )?;
        let v1 = rr * rr / integral;
        Ok(if r > 1.0 { v1 * r * r } else { v1 })
    }

    /// `ν₁(r) = -J'(r)/(2πr)`.
    pub fn nu1_eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain("nu1_eval", format!("r = {r} must be positive")));
        }
        let v = -self.jump.dj(r) / (2.0 * std::f64::consts::PI * r);
        if v < 0.0 {
            return Err(Error::param("jump", format!("nu1({r}) = {v} is negative; J is not non-increasing")));
        }
        Ok(v)
    }
}

/// Outcome of the numerical (J2) monotonicity check.
#[derive(Debug, Clone, Serialize)]
pub struct J2Report {
    pub points: usize,
    pub max_violation: f64,
    pub location: f64,
    pub passed: bool,
}

/// Checks that `-J'(r)/r` is non-increasing on a geometric grid over `[1e-4, 50]`.
pub fn j2_check(jump: &dyn JumpKernel) -> J2Report {
    let n = 4000;
    let (lo, hi): (f64, f64) = (1e-4, 50.0);
    let q = (hi / lo).ln() / n as f64;
    let g = |r: f64| -jump.dj(r) / r;
    let mut prev = g(lo);
    let mut worst = 0.0f64;
    let mut at = lo;
    for i in 1..=n {
        let r = lo * (q * i as f64).exp();
        let v = g(r);
        let scale = prev.abs().max(v.abs()).max(f64::MIN_POSITIVE);
        let viol = (v - prev) / scale;
        if viol > worst {
            worst = viol;
            at = r;
        }
        prev = v;
    }
    J2Report { points: n + 1, max_violation: worst, location: at, passed: worst <= 1e-12 }
}

/// A jump kernel given by closures, for user-supplied or test kernels.
pub struct ClosureKernel {
    pub j: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dj: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub small_exponent: f64,
    pub cutoff: f64,
    pub label: String,
}

impl fmt::Debug for ClosureKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureKernel({})", self.label)
    }
}

impl JumpKernel for ClosureKernel {
    fn j(&self, r: f64) -> f64 {
        (self.j)(r)
    }
    fn dj(&self, r: f64) -> f64 {
        (self.dj)(r)
    }
    fn small_exponent(&self) -> f64 {
        self.small_exponent
    }
    fn cutoff_radius(&self) -> f64 {
        self.cutoff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::gamma::gamma;

    fn model(beta: f64) -> LevyModel {
        LevyModel::new(ModelSpec { beta, ..ModelSpec::default() }).unwrap()
    }

    /// Closed form for β = 1: ψ(ξ) = -2Γ(-α)[(b²+ξ²)^{α/2} cos(α atan(ξ/b)) - b^α].
    /// Evaluated as `b^α Re[(1+iu)^α - 1]` with `u = ξ/b` in cancellation-free form.
    fn psi_beta_one(alpha: f64, b: f64, xi: f64) -> f64 {
        let u = xi / b;
        let re = 0.5 * alpha * (u * u).ln_1p();
        let im = alpha * u.atan();
        let h = (0.5 * im).sin();
        let bracket = re.exp_m1() * im.cos() - 2.0 * h * h;
        -2.0 * gamma(-alpha) * b.powf(alpha) * bracket
    }

    #[test]
    fn j_eval_examples() {
        let m = model(0.5);
        assert!((m.j_eval(1.0) - 0.367_879_441_171_442_3).abs() < 1e-15);
        for &r in &[1e-3, 0.1, 0.5, 1.0] {
            let v = m.j_eval(r) * r * r.powf(1.2);
            assert!(v >= (-1.0f64).exp() - 1e-15 && v <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn psi_matches_closed_form_for_exponential_tempering() {
        let m = model(1.0);
        let k = FreezeKernel::Constant(1.0);
        for &xi in &[1e-3, 0.1, 1.0, 7.5, 100.0, 1e4, 3e6] {
            let exact = psi_beta_one(1.2, 1.0, xi);
            let v = m.psi_eval(xi, &k).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-11, "xi={xi}: {v} vs {exact}");
        }
    }

    #[test]
    fn psi_table_matches_direct_quadrature() {
        let m = model(0.5);
        let t = m.unit_table().unwrap();
        assert!(t.max_interp_error() < PSI_TABLE_TOL);
        for &xi in &[1e-5, 3.3e-4, 0.0123, 0.77, 13.1, 4567.0, 2.2e6] {
            let (v, d) = t.eval_with_derivative(xi);
            let (e, de) = psi_direct(&FreezeKernel::Constant(1.0), m.jump().as_ref(), xi).unwrap();
            assert!((v / e - 1.0).abs() < 1e-8, "xi={xi}: {v} vs {e}");
            assert!((d / de - 1.0).abs() < 1e-5, "xi={xi}: {d} vs {de}");
        }
        assert_eq!(t.eval(0.0), 0.0);
    }

    #[test]
    fn generator_of_cosine_uses_psi_at_one() {
        // (1/2)∫ (cos(x+z)+cos(x-z)-2cos x) J = -cos(x) ∫ (1-cos z) J = -cos(x) ψ(1).
        let m = model(0.5);
        let j = m.jump().clone();
        let x: f64 = 0.4;
        let second_difference = |z: f64| (x + z).cos() + (x - z).cos() - 2.0 * x.cos();
        // Near zero the second difference is replaced by its Taylor series to avoid cancellation.
        let eps = 1e-2;
        let p = 2.0 / (2.0 - 1.2);
        let head = adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let z = eps * up;
                let z2 = z * z;
                -x.cos() * z2 * (1.0 - z2 / 12.0 + z2 * z2 / 360.0) * j.j(z) * eps * p * up / u
            },
            0.0,
            1.0,
            1e-15,
            1e-13,
            "test",
        )
        .unwrap();
        let tail = radial_integral(|z| second_difference(z) * j.j(z), eps, 4000.0).unwrap();
        let lf = head + tail;
        let psi1 = m.psi_eval(1.0, &FreezeKernel::Constant(1.0)).unwrap();
        assert!((lf + x.cos() * psi1).abs() < 1e-9 * psi1);
    }

    #[test]
    fn psi_is_additive_in_the_coefficient() {
        let m = model(0.5);
        let k1 = FreezeKernel::Gaussian { base: 0.3, amplitude: 0.4, width: 0.7 };
        let k2 = FreezeKernel::Lorentzian { base: 0.5, amplitude: 0.2, width: 1.5 };
        let k12 = FreezeKernel::Custom {
            f: {
                let (a, b) = (k1.clone(), k2.clone());
                Arc::new(move |z| a.eval(z) + b.eval(z))
            },
            bounds: (0.8, 1.4),
            label: "sum".into(),
        };
        for &xi in &[0.01, 0.9, 31.0, 2e3] {
            let s = m.psi_eval(xi, &k1).unwrap() + m.psi_eval(xi, &k2).unwrap();
            let v = m.psi_eval(xi, &k12).unwrap();
            assert!((v / s - 1.0).abs() < 1e-10, "xi={xi}");
        }
    }

    #[test]
    fn pruitt_bounds_on_psi() {
        let m = model(0.5);
        let k = FreezeKernel::Constant(1.0);
        let pi2 = std::f64::consts::PI.powi(2);
        for &xi in &[1e-3, 0.05, 1.0, 20.0, 1e4] {
            let psi = m.psi_eval(xi, &k).unwrap();
            let pr = m.pruitt_eval(1.0 / xi).unwrap();
            assert!(psi >= 2.0 / pi2 * pr && psi <= 2.0 * pi2 * pr, "xi={xi}");
        }
    }

    #[test]
    fn pruitt_second_moment_limit() {
        let m = model(0.5);
        let m2 = moment(&FreezeKernel::Constant(1.0), m.jump().as_ref(), 2).unwrap();
        // 4Γ(1.6) for α = 1.2, b = 1, β = 1/2.
        assert!((m2 - 4.0 * gamma(1.6)).abs() < 1e-11);
        let r = 1e4;
        let v = r * r * m.pruitt_eval(r).unwrap();
        assert!((v / m2 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn varphi_examples() {
        let m = model(0.5);
        for &(r, big) in &[(0.01, 0.5), (0.2, 0.9), (0.5, 3.0)] {
            let a = m.varphi_eval(r).unwrap();
            let b = m.varphi_eval(big).unwrap();
            assert!(b / a <= (big / r).powi(2) * (1.0 + 1e-12));
        }
        for &r in &[1e-3, 0.1, 0.7] {
            let inv = 1.0 / m.varphi_eval(r).unwrap();
            assert!(inv >= r * m.j_eval(r) / 3.0);
            let phi = m.bounds().phi_big(r).unwrap();
            let ratio = m.varphi_eval(r).unwrap() / phi;
            assert!(ratio >= 2.0 && ratio <= 2.0 * 1.0f64.exp(), "ratio {ratio}");
        }
        let v1 = m.varphi_eval(1.0).unwrap();
        assert!((m.varphi_eval(3.0).unwrap() - 9.0 * v1).abs() < 1e-12 * v1);
    }

    #[test]
    fn j2_check_examples() {
        for &beta in &[0.3, 0.5, 1.0] {
            let j = TemperedStable { d: 1, alpha: 1.2, b: 1.0, beta };
            assert!(j2_check(&j).passed);
        }
        let cubic = ClosureKernel {
            j: Box::new(|r: f64| (-r * r * r).exp()),
            dj: Box::new(|r: f64| -3.0 * r * r * (-r * r * r).exp()),
            small_exponent: 0.0,
            cutoff: 10.0,
            label: "exp(-r^3)".into(),
        };
        let rep = j2_check(&cubic);
        assert!(!rep.passed && rep.max_violation > 1e-3);
        let scaled = ClosureKernel {
            j: Box::new(|r: f64| 5.0 * (-r * r * r).exp()),
            dj: Box::new(|r: f64| -15.0 * r * r * (-r * r * r).exp()),
            small_exponent: 0.0,
            cutoff: 10.0,
            label: "5 exp(-r^3)".into(),
        };
        assert_eq!(j2_check(&scaled).passed, rep.passed);
    }

    #[test]
    fn nu1_scales_linearly() {
        let m = model(0.5);
        let v = m.nu1_eval(0.3).unwrap();
        let expected = -m.jump().dj(0.3) / (2.0 * std::f64::consts::PI * 0.3);
        assert_eq!(v, expected);
    }

    #[test]
    fn model_validation_names_fields() {
        let bad = ModelSpec { alpha: 2.5, ..ModelSpec::default() };
        match bad.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = ModelSpec { beta: 1.5, ..ModelSpec::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { field, .. }) if field == "beta"));
        let bad = ModelSpec { horizon: 0.5, ..ModelSpec::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { field, .. }) if field == "T"));
    }

    proptest! {
        #[test]
        fn builtin_kappa_is_elliptic_symmetric_and_holder(x in -50.0f64..50.0, y in -50.0f64..50.0, z in -20.0f64..20.0) {
            let k = KappaSpec::default();
            let (k0, k1) = k.ellipticity();
            let v = k.eval(x, z);
            prop_assert!(v >= k0 && v <= k1);
            prop_assert_eq!(v, k.eval(x, -z));
            let (k2, delta) = k.holder();
            prop_assert!((k.eval(x, z) - k.eval(y, z)).abs() <= k2 * (x - y).abs().powf(delta) + 1e-15);
        }

        #[test]
        fn separable_form_reproduces_kappa(x in -10.0f64..10.0, z in -5.0f64..5.0) {
            for k in [KappaSpec::default(), KappaSpec::Constant { value: 0.8 },
                      KappaSpec::CosineBump { mean: 1.0, amplitude: 0.3, frequency: 1.0, width: 0.8 }] {
                let s: f64 = k.separable().iter().map(|(a, p)| a.eval(x) * p.eval(z)).sum();
                prop_assert!((s - k.eval(x, z)).abs() < 1e-14);
            }
        }

        #[test]
        fn j_is_non_increasing(r in 1e-4f64..50.0, dr in 0.0f64..5.0) {
            let j = TemperedStable { d: 1, alpha: 1.2, b: 1.0, beta: 0.5 };
            prop_assert!(j.j(r + dr) <= j.j(r));
        }
    }
}
