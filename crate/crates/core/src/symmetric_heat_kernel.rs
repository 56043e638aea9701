//! Transition densities of symmetric Lévy processes with jumping kernel
//! `𝔎(z)J(|z|)` in dimension one.
//!
//! Densities are computed by Fourier inversion
//! `p(t,x) = (1/π) ∫₀^∞ cos(ξx) e^{-tψ(ξ)} dξ` on geometric ξ-panels, using
//! Gauss–Legendre sums for slowly oscillating panels and Filon–Legendre
//! moments otherwise.  Spatial derivatives and `∂_t p = L^𝔎 p` come from the
//! Fourier multipliers `iξ`, `-ξ²` and `-ψ` on the same panels.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{FreezeKernel, JumpKernel, LevyModel, Symbol};
use crate::quad::{
    adaptive_gk, adaptive_gk_breaks, geometric_breaks, panel_rule, spherical_bessel, FilonLegendre, FILON_OMEGA,
    PANEL_NODES,
};
use crate::scale_functions::BoundFunctions;

/// Inversion stops at the frequency Ξ with `tψ(Ξ)` equal to this level.
pub const TRUNCATION_LEVEL: f64 = 45.0;
/// The first panel is `[0, Ξ·LOW_FRACTION]`.
const LOW_FRACTION: f64 = 1e-7;
const PANEL_RATIO: f64 = 1.3;
/// Lattice plans taper the symbol on `[TAPER_START·band, band]`.
const TAPER_START: f64 = 0.5;
const CHANNELS: usize = 4;

#[derive(Debug, Clone)]
struct Panel {
    mid: f64,
    hw: f64,
    nodes: [f64; PANEL_NODES],
    /// `w_i · hw · g_k(ξ_i) / π` for the Gauss–Legendre sums.
    weighted: [[f64; PANEL_NODES]; CHANNELS],
    /// Legendre coefficients of `hw · g_k / π` for the Filon moments.
    coeffs: [[f64; PANEL_NODES]; CHANNELS],
}

/// Precomputed inversion data for one time `t`.
///
/// Channels are the multipliers `e^{-tψ}`, `ψe^{-tψ}`, `ξe^{-tψ}` and `ξ²e^{-tψ}`.
#[derive(Debug, Clone)]
pub struct InversionPlan {
    t: f64,
    cutoff: f64,
    truncation: f64,
    panels: Vec<Panel>,
}

/// Value and derivatives of a kernel at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelDerivatives {
    pub p: f64,
    pub dp: f64,
    pub d2p: f64,
    pub dtp: f64,
}

impl InversionPlan {
    /// Builds the plan for `e^{-tψ}`; `band` truncates the frequency range at
    /// `min(Ξ, band)`, giving the band-limited kernel.
    pub fn new(symbol: &Symbol, t: f64, band: Option<f64>) -> Result<Self> {
        Self::with_multiplier(symbol, None, t, band)
    }

    /// As [`InversionPlan::new`], with channel 1 carrying `m(ξ)e^{-tψ}` for the
    /// given multiplier symbol `m` instead of `ψe^{-tψ}`.  With a finite band,
    /// `t = 0` is allowed.
    pub fn with_multiplier(symbol: &Symbol, multiplier: Option<&Symbol>, t: f64, band: Option<f64>) -> Result<Self> {
        Self::build(symbol, multiplier, t, band, false)
    }

    /// Band-limited plan for the lattice of step `π/band` whose symbols are
    /// evaluated at `m(ξ)`, a monotone reparametrization equal to ξ below
    /// `band/2` and flat to third order at `band`.  The tapered symbol extends
    /// smoothly as a periodic function, so the lattice kernels have no
    /// alternating `1/w²` tail from a kink at the band edge.
    pub fn lattice(symbol: &Symbol, multiplier: Option<&Symbol>, t: f64, band: f64) -> Result<Self> {
        Self::build(symbol, multiplier, t, Some(band), true)
    }

    fn build(symbol: &Symbol, multiplier: Option<&Symbol>, t: f64, band: Option<f64>, taper: bool) -> Result<Self> {
        let zero_ok = t == 0.0 && band.is_some();
        if !((t > 0.0 || zero_ok) && t.is_finite()) {
            return Err(Error::domain("InversionPlan::new", format!("t = {t} must be positive and finite")));
        }
        let truncation = if t == 0.0 { f64::INFINITY } else { symbol.level_crossing(t, TRUNCATION_LEVEL) };
        let cutoff = match band {
            Some(b) if b > 0.0 => b.min(truncation),
            Some(b) => return Err(Error::domain("InversionPlan::new", format!("band {b} must be positive"))),
            None => truncation,
        };
        let cutoff = match (taper, band) {
            (true, Some(b)) => b,
            _ => cutoff,
        };
        let lo = (truncation.min(cutoff / LOW_FRACTION) * LOW_FRACTION).min(0.5 * cutoff);
        let mut breaks = vec![0.0];
        breaks.extend(geometric_breaks(lo, cutoff, PANEL_RATIO));
        let taper_start = band.map(|b| TAPER_START * b);
        if let (true, Some(xc)) = (taper, taper_start) {
            if xc < cutoff && !breaks.contains(&xc) {
                breaks.push(xc);
                breaks.sort_by(f64::total_cmp);
            }
        }
        let remap = |xi: f64| -> f64 {
            match (taper, band, taper_start) {
                (true, Some(b), Some(xc)) if xi > xc => {
                    let u = ((xi - xc) / (b - xc)).min(1.0);
                    let u4 = u * u * u * u;
                    xc + (b - xc) * (u - u4 * u * (7.0 - 14.0 * u + 10.0 * u * u - 2.5 * u * u * u))
                }
                _ => xi,
            }
        };
        let rule = panel_rule();
        let filon = FilonLegendre::get();
        let inv_pi = std::f64::consts::FRAC_1_PI;
        let mut panels = Vec::with_capacity(breaks.len());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let hw = 0.5 * (b - a);
            let mut nodes = [0.0; PANEL_NODES];
            let mut vals = [[0.0; PANEL_NODES]; CHANNELS];
            for i in 0..PANEL_NODES {
                let xi = mid + hw * rule.nodes[i];
                nodes[i] = xi;
                let xm = remap(xi);
                let psi = symbol.eval(xm);
                let e = (-t * psi).exp();
                vals[0][i] = e;
                vals[1][i] = multiplier.map_or(psi, |m| m.eval(xm)) * e;
                vals[2][i] = xi * e;
                vals[3][i] = xi * xi * e;
            }
            if !vals.iter().flatten().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { value: f64::NAN, location: format!("inversion panel [{a}, {b}] at t = {t}") });
            }
            let mut weighted = [[0.0; PANEL_NODES]; CHANNELS];
            let mut coeffs = [[0.0; PANEL_NODES]; CHANNELS];
            for k in 0..CHANNELS {
                for i in 0..PANEL_NODES {
                    weighted[k][i] = rule.weights[i] * hw * vals[k][i] * inv_pi;
                }
                let c = filon.coefficients(&vals[k]);
                for i in 0..PANEL_NODES {
                    coeffs[k][i] = c[i] * hw * inv_pi;
                }
            }
            panels.push(Panel { mid, hw, nodes, weighted, coeffs });
        }
        Ok(InversionPlan { t, cutoff, truncation, panels })
    }

    /// Time of the plan.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Upper end of the frequency range actually integrated.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Frequency Ξ with `tψ(Ξ) = TRUNCATION_LEVEL`.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// `p(t, x)`.
    pub fn value(&self, x: f64) -> f64 {
        let ax = x.abs();
        let mut out = 0.0;
        for panel in &self.panels {
            let w = ax * panel.hw;
            if w <= FILON_OMEGA {
                for i in 0..PANEL_NODES {
                    out += panel.weighted[0][i] * (ax * panel.nodes[i]).cos();
                }
            } else {
                let j = spherical_bessel(w);
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[0], &j);
                let (sm, cm) = (ax * panel.mid).sin_cos();
                out += cm * c - sm * s;
            }
        }
        out
    }

    /// `(p, ∂_t p)` at `x`; with a multiplier, the second entry is `-(1/π)∫ m cos(ξx) e^{-tψ}`.
    pub fn value_and_generator(&self, x: f64) -> (f64, f64) {
        let ax = x.abs();
        let mut cos0 = 0.0;
        let mut cos1 = 0.0;
        for panel in &self.panels {
            let w = ax * panel.hw;
            if w <= FILON_OMEGA {
                for i in 0..PANEL_NODES {
                    let c = (ax * panel.nodes[i]).cos();
                    cos0 += panel.weighted[0][i] * c;
                    cos1 += panel.weighted[1][i] * c;
                }
            } else {
                let j = spherical_bessel(w);
                let (sm, cm) = (ax * panel.mid).sin_cos();
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[0], &j);
                cos0 += cm * c - sm * s;
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[1], &j);
                cos1 += cm * c - sm * s;
            }
        }
        (cos0, -cos1)
    }

    /// `p`, `∂_x p`, `∂²_x p` and `∂_t p` at `x`.
    pub fn derivatives(&self, x: f64) -> KernelDerivatives {
        let ax = x.abs();
        let mut cos0 = 0.0;
        let mut cos1 = 0.0;
        let mut sin2 = 0.0;
        let mut cos3 = 0.0;
        for panel in &self.panels {
            let w = ax * panel.hw;
            if w <= FILON_OMEGA {
                for i in 0..PANEL_NODES {
                    let (s, c) = (ax * panel.nodes[i]).sin_cos();
                    cos0 += panel.weighted[0][i] * c;
                    cos1 += panel.weighted[1][i] * c;
                    sin2 += panel.weighted[2][i] * s;
                    cos3 += panel.weighted[3][i] * c;
                }
            } else {
                let j = spherical_bessel(w);
                let (sm, cm) = (ax * panel.mid).sin_cos();
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[0], &j);
                cos0 += cm * c - sm * s;
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[1], &j);
                cos1 += cm * c - sm * s;
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[2], &j);
                sin2 += sm * c + cm * s;
                let (c, s) = FilonLegendre::moments_with(&panel.coeffs[3], &j);
                cos3 += cm * c - sm * s;
            }
        }
        KernelDerivatives { p: cos0, dp: -sin2 * x.signum(), d2p: -cos3, dtp: -cos1 }
    }
}

/// The symmetric kernel `p^𝔎` of one coefficient 𝔎, with per-time plan cache.
#[derive(Debug)]
pub struct SymmetricKernel {
    kernel: FreezeKernel,
    symbol: Symbol,
    bounds: BoundFunctions,
    jump: Arc<dyn JumpKernel>,
    plans: Mutex<HashMap<u64, Arc<InversionPlan>>>,
}

impl SymmetricKernel {
    /// Kernel of the process with jumping kernel `𝔎(z)J(|z|)`.
    pub fn new(model: &LevyModel, kernel: FreezeKernel) -> Result<Self> {
        let (lo, _) = kernel.bounds();
        if !(lo > 0.0) {
            return Err(Error::param("kernel", format!("inf of the coefficient must be positive, got {lo}")));
        }
        if model.spec().d != 1 {
            return Err(Error::param("d", "kernel grids require d = 1"));
        }
        let symbol = model.symbol(&kernel)?;
        Ok(Self::with_symbol(model, kernel, symbol))
    }

    /// Kernel with a precomputed symbol.
    pub fn with_symbol(model: &LevyModel, kernel: FreezeKernel, symbol: Symbol) -> Self {
        SymmetricKernel {
            kernel,
            symbol,
            bounds: model.bounds().clone(),
            jump: model.jump().clone(),
            plans: Mutex::new(HashMap::new()),
        }
    }

    pub fn kernel(&self) -> &FreezeKernel {
        &self.kernel
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn bounds(&self) -> &BoundFunctions {
        &self.bounds
    }

    /// Cached inversion plan at time `t`.
    pub fn plan(&self, t: f64) -> Result<Arc<InversionPlan>> {
        let key = t.to_bits();
        if let Some(p) = self.plans.lock().expect("plan cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let plan = Arc::new(InversionPlan::new(&self.symbol, t, None)?);
        let mut cache = self.plans.lock().expect("plan cache poisoned");
        if cache.len() > 4096 {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(plan).clone())
    }

    /// `p^𝔎(t, x)`.
    pub fn p(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.plan(t)?.value(x))
    }

    /// Value and derivatives at `(t, x)`.
    pub fn derivatives(&self, t: f64, x: f64) -> Result<KernelDerivatives> {
        Ok(self.plan(t)?.derivatives(x))
    }

    /// `∂_x^k p^𝔎(t, x)` for `k ∈ {0, 1, 2}`.
    pub fn grad(&self, k: u8, t: f64, x: f64) -> Result<f64> {
        let d = self.derivatives(t, x)?;
        match k {
            0 => Ok(d.p),
            1 => Ok(d.dp),
            2 => Ok(d.d2p),
            _ => Err(Error::domain("grad_p", format!("order {k} not in {{0, 1, 2}}"))),
        }
    }

    /// Second difference `δ_p(t, x; z) = p(t,x+z) + p(t,x-z) - 2p(t,x)`.
    pub fn delta(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        let plan = self.plan(t)?;
        Ok(plan.value(x + z) + plan.value(x - z) - 2.0 * plan.value(x))
    }

    /// `∫ |δ_p(t,x;z)| J(|z|) dz`.
    pub fn abs_delta_integral(&self, t: f64, x: f64) -> Result<f64> {
        let plan = self.plan(t)?;
        let scale = self.bounds.phi_inv_fast(t);
        let p0 = plan.value(x);
        let d2 = plan.derivatives(x).d2p;
        let noise = INVERSION_NOISE * plan.value(0.0);
        singular_abs_integral(|z| plan.value(x + z) + plan.value(x - z) - 2.0 * p0, d2, noise, self.jump.as_ref(), scale)
    }

    /// Values on a `(t, x)` grid.
    pub fn field(&self, times: &[f64], xs: &[f64]) -> Result<KernelField> {
        let mut values = Vec::with_capacity(times.len() * xs.len());
        for &t in times {
            let plan = self.plan(t)?;
            values.extend(xs.iter().map(|&x| plan.value(x)));
        }
        Ok(KernelField::new(
            "p_sym",
            times.to_vec(),
            xs.to_vec(),
            None,
            values,
            serde_json::json!({ "kernel": format!("{:?}", self.kernel), "truncation_level": TRUNCATION_LEVEL }),
        ))
    }

    /// Uniform grid step and half-width resolving `p(t, ·)` to the mass tolerance.
    fn mass_grid(&self, t: f64) -> Result<(f64, usize)> {
        let plan = self.plan(t)?;
        let h = std::f64::consts::PI / plan.truncation();
        let kmax = self.kernel.bounds().1;
        let mut l = self.bounds.phi_inv_fast(t).max(1.0);
        while self.tail_mass(t, l, kmax)? > 1e-13 && l < 1e5 {
            l *= 1.5;
        }
        let n = (l / h).ceil() as usize;
        if n > 4_000_000 {
            return Err(Error::domain("mass", format!("grid of {n} points at t = {t} is too large")));
        }
        Ok((h, n))
    }

    /// First-order tail mass `2 t sup𝔎 ∫_L^∞ J`.
    fn tail_mass(&self, t: f64, l: f64, kmax: f64) -> Result<f64> {
        let j = self.jump.clone();
        let upper = j.cutoff_radius().max(2.0 * l) * 4.0;
        let tail = crate::levy_model::radial_integral(|r| j.j(r), l, upper)?;
        Ok(2.0 * t * kmax * tail)
    }

    /// Total mass by the trapezoid rule on a uniform grid plus the tail estimate.
    pub fn mass(&self, t: f64) -> Result<MassReport> {
        let (h, n) = self.mass_grid(t)?;
        let plan = self.plan(t)?;
        let mut s = 0.5 * plan.value(0.0);
        for j in 1..=n {
            s += plan.value(j as f64 * h);
        }
        let grid_mass = 2.0 * h * s;
        let tail = self.tail_mass(t, n as f64 * h, self.kernel.bounds().1)?;
        let mass = grid_mass + tail;
        Ok(MassReport { t, mass, deviation: (mass - 1.0).abs(), step: h, half_width: n as f64 * h, tail_estimate: tail })
    }

    /// Largest increase of `r ↦ p(t, r)` on a fine grid of `[0, 20]`.
    pub fn unimodality_violation(&self, t: f64) -> Result<f64> {
        let plan = self.plan(t)?;
        let s = self.bounds.phi_inv_fast(t);
        let mut rs: Vec<f64> = (0..=200).map(|i| s * i as f64 / 100.0).collect();
        rs.extend(geometric_breaks(2.0 * s, 20.0f64.max(4.0 * s), 1.01));
        rs.sort_by(f64::total_cmp);
        let mut prev = plan.value(rs[0]);
        let mut worst = f64::NEG_INFINITY;
        for &r in &rs[1..] {
            let v = plan.value(r);
            worst = worst.max(v - prev);
            prev = v;
        }
        Ok(worst.max(0.0))
    }

    /// `sup_x |∫ p(t, x-y) p(s, y) dy - p(t+s, x)|` on 81 grid points of `[-4, 4]·Φ⁻¹(t+s)`.
    pub fn chapman_kolmogorov(&self, t: f64, s: f64) -> Result<SupReport> {
        let pt = self.plan(t)?;
        let ps = self.plan(s)?;
        let pts = self.plan(t + s)?;
        let h = std::f64::consts::PI / pt.truncation().max(ps.truncation());
        let (_, n_t) = self.mass_grid(t.min(s))?;
        let l = (n_t as f64 * std::f64::consts::PI / self.plan(t.min(s))?.truncation()).min(200.0);
        let n = (l / h).ceil() as i64;
        let a: Vec<f64> = (-2 * n..=2 * n).map(|j| pt.value(j as f64 * h)).collect();
        let b: Vec<f64> = (-n..=n).map(|j| ps.value(j as f64 * h)).collect();
        let scale = 4.0 * self.bounds.phi_inv_fast(t + s);
        let step = ((scale / 40.0 / h).round() as i64).max(1);
        let mut worst = SupReport { value: 0.0, t: t + s, x: 0.0 };
        for i in -40..=40i64 {
            let xi = i * step;
            let mut acc = 0.0;
            for (k, bv) in b.iter().enumerate() {
                let yj = k as i64 - n;
                let idx = xi - yj + 2 * n;
                if idx >= 0 && (idx as usize) < a.len() {
                    acc += a[idx as usize] * bv;
                }
            }
            let x = xi as f64 * h;
            let err = (h * acc - pts.value(x)).abs();
            if err > worst.value {
                worst = SupReport { value: err, t: t + s, x };
            }
        }
        Ok(worst)
    }

    /// Largest relative deviation of the multiplier derivatives from
    /// five-point central differences with step `1e-2 Φ⁻¹(t)` at the given points.
    ///
    /// The error of `∂_x^k p` is taken relative to `max(|∂_x^k p|, p Φ⁻¹(t)^{-k})`,
    /// so that zero crossings of the derivative do not divide by zero.
    pub fn derivative_fd_check(&self, t: f64, xs: &[f64]) -> Result<SupReport> {
        let plan = self.plan(t)?;
        let s = self.bounds.phi_inv_fast(t);
        let h = 1e-2 * s;
        let mut worst = SupReport { value: 0.0, t, x: 0.0 };
        for &x in xs {
            let d = plan.derivatives(x);
            let v = |k: f64| plan.value(x + k * h);
            let (m2, m1, p0, p1, p2) = (v(-2.0), v(-1.0), v(0.0), v(1.0), v(2.0));
            let fd1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
            let fd2 = (-m2 + 16.0 * m1 - 30.0 * p0 + 16.0 * p1 - p2) / (12.0 * h * h);
            let e1 = (d.dp - fd1).abs() / d.dp.abs().max(p0 / s);
            let e2 = (d.d2p - fd2).abs() / d.d2p.abs().max(p0 / (s * s));
            let e = e1.max(e2);
            if e > worst.value {
                worst = SupReport { value: e, t, x };
            }
        }
        Ok(worst)
    }

    /// Sup relative residual of `∂_t p = L^𝔎 p` over the given points, with
    /// `∂_t p` from the multiplier and `L^𝔎 p` by singular quadrature.
    pub fn generator_residual(&self, t: f64, xs: &[f64]) -> Result<SupReport> {
        let plan = self.plan(t)?;
        let scale = self.bounds.phi_inv_fast(t);
        let mut worst = SupReport { value: 0.0, t, x: 0.0 };
        let norm = xs.iter().map(|&x| plan.derivatives(x).dtp.abs()).fold(0.0, f64::max);
        for &x in xs {
            let d = plan.derivatives(x);
            let lp = generator_apply_with(|y| plan.value(y), x, d.d2p, &self.kernel, self.jump.as_ref(), 0.0, scale)?;
            let e = (lp - d.dtp).abs() / norm;
            if e > worst.value {
                worst = SupReport { value: e, t, x };
            }
        }
        Ok(worst)
    }
}

/// Mass of a computed density.
#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub t: f64,
    pub mass: f64,
    pub deviation: f64,
    pub step: f64,
    pub half_width: f64,
    pub tail_estimate: f64,
}

/// A supremum with the point where it is attained.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SupReport {
    pub value: f64,
    pub t: f64,
    pub x: f64,
}

const GUARD_FRACTION: f64 = 1e-3;

/// Absolute accuracy of an inverted value relative to the peak `p(t, 0)`.
const INVERSION_NOISE: f64 = 1e-13;

/// `L^𝔎 f(x) = ½ ∫_{|z|>ε} δ_f(x;z) 𝔎(z) J(|z|) dz`.
///
/// Near `z = 0` the second difference is replaced by `f''(x) z²`, with the
/// curvature estimated from `δ_f(x; z_g)/z_g²` at `z_g = 1e-3 · scale`, where
/// `scale` is the length on which `f` varies.
pub fn generator_apply<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    kernel: &FreezeKernel,
    jump: &dyn JumpKernel,
    eps: f64,
    scale: f64,
) -> Result<f64> {
    let zg = GUARD_FRACTION * scale;
    let fx = f(x);
    let curvature = (f(x + zg) + f(x - zg) - 2.0 * fx) / (zg * zg);
    generator_apply_with(f, x, curvature, kernel, jump, eps, scale)
}

/// [`generator_apply`] with a known second derivative `f''(x)`.
pub fn generator_apply_with<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    curvature: f64,
    kernel: &FreezeKernel,
    jump: &dyn JumpKernel,
    eps: f64,
    scale: f64,
) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::domain("generator_apply", format!("cutoff eps = {eps} must be non-negative")));
    }
    if !(scale > 0.0) {
        return Err(Error::domain("generator_apply", format!("scale = {scale} must be positive")));
    }
    let zg = GUARD_FRACTION * scale;
    let fx = f(x);
    let mut total = 0.0;
    if eps < zg {
        total += curvature * weighted_moment(kernel, jump, eps, zg)?;
    }
    let start = eps.max(zg);
    let upper = jump.cutoff_radius();
    if start < upper {
        let breaks = geometric_breaks(start, upper, 2.0);
        let mag = fx.abs().max(curvature.abs() * scale * scale);
        let abs_tol = 1e-12 * mag * start.powf(-jump.small_exponent());
        total += adaptive_gk_breaks(
            |z| (f(x + z) + f(x - z) - 2.0 * fx) * kernel.eval(z) * jump.j(z),
            &breaks,
            abs_tol,
            1e-11,
            "generator_apply",
        )?;
    }
    Ok(total)
}

/// `∫_a^b z² 𝔎(z) J(z) dz` with the endpoint substitution at zero.
fn weighted_moment(kernel: &FreezeKernel, jump: &dyn JumpKernel, a: f64, b: f64) -> Result<f64> {
    let p = 2.0 / (2.0 - jump.small_exponent());
    let full = |hi: f64| -> Result<f64> {
        adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let z = hi * up;
                z * z * kernel.eval(z) * jump.j(z) * hi * p * up / u
            },
            0.0,
            1.0,
            0.0,
            1e-13,
            "generator head",
        )
    };
    Ok(full(b)? - if a > 0.0 { full(a)? } else { 0.0 })
}

/// `∫ |δ(z)| J(|z|) dz` over the real line, for a second difference `δ` with
/// curvature `curvature` at zero.
///
/// `noise` is the absolute accuracy of the values entering `δ`; the integral is
/// not resolved below the level that noise produces against `J`.
fn singular_abs_integral<F: Fn(f64) -> f64>(delta: F, curvature: f64, noise: f64, jump: &dyn JumpKernel, scale: f64) -> Result<f64> {
    let zg = GUARD_FRACTION * scale;
    let head = curvature.abs() * weighted_moment(&FreezeKernel::Constant(1.0), jump, 0.0, zg)?;
    let upper = jump.cutoff_radius();
    let breaks = geometric_breaks(zg, upper, 1.5);
    let abs_tol = (1e-12 * curvature.abs() * scale * scale).max(noise) * zg.powf(-jump.small_exponent());
    let tail = adaptive_gk_breaks(|z| delta(z).abs() * jump.j(z), &breaks, abs_tol, 1e-7, "abs second difference")?;
    Ok(2.0 * (head + tail))
}

/// Outcome of the convolution identity check.
#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionReport {
    pub t: f64,
    pub sup_error: f64,
    pub location: f64,
    pub fourier_error: f64,
}

/// Checks `p^𝔎(t,·) = p^{κ₀/2}(t,·) * p^{𝔎-κ₀/2}(t,·)` in physical space and on
/// the Fourier side.
pub fn convolution_identity_check(model: &LevyModel, kernel: &FreezeKernel, kappa0: f64, t: f64) -> Result<ConvolutionReport> {
    let (lo, _) = kernel.bounds();
    if !(kappa0 > 0.0 && kappa0 < 2.0 * lo) {
        return Err(Error::param("kappa0", format!("need 0 < kappa0 < 2 inf K = {}", 2.0 * lo)));
    }
    let full = SymmetricKernel::new(model, kernel.clone())?;
    let half = SymmetricKernel::new(model, FreezeKernel::Constant(0.5 * kappa0))?;
    let hat = SymmetricKernel::new(model, kernel.shifted(-0.5 * kappa0))?;
    let mut fourier_error: f64 = 0.0;
    for i in 0..200 {
        let xi = 10f64.powf(-3.0 + 8.0 * i as f64 / 199.0);
        let lhs = (-t * model.psi_eval(xi, kernel)?).exp();
        let rhs = (-t * model.psi_eval(xi, &FreezeKernel::Constant(0.5 * kappa0))?).exp() * (-t * model.psi_eval(xi, &kernel.shifted(-0.5 * kappa0))?).exp();
        fourier_error = fourier_error.max((lhs - rhs).abs());
    }
    let pf = full.plan(t)?;
    let ph = half.plan(t)?;
    let pk = hat.plan(t)?;
    let h = std::f64::consts::PI / ph.truncation().max(pk.truncation()).max(pf.truncation());
    let l = 60.0f64.max(10.0 * model.bounds().phi_inv_fast(t));
    let n = (l / h).ceil() as i64;
    let a: Vec<f64> = (-2 * n..=2 * n).map(|j| ph.value(j as f64 * h)).collect();
    let b: Vec<f64> = (-n..=n).map(|j| pk.value(j as f64 * h)).collect();
    let scale = 4.0 * model.bounds().phi_inv_fast(t);
    let step = ((scale / 40.0 / h).round() as i64).max(1);
    let mut sup_error = 0.0;
    let mut location = 0.0;
    for i in -40..=40i64 {
        let xi = i * step;
        let mut acc = 0.0;
        for (k, bv) in b.iter().enumerate() {
            let idx = xi - (k as i64 - n) + 2 * n;
            if idx >= 0 && (idx as usize) < a.len() {
                acc += a[idx as usize] * bv;
            }
        }
        let x = xi as f64 * h;
        let err = (h * acc - pf.value(x)).abs();
        if err > sup_error {
            sup_error = err;
            location = x;
        }
    }
    Ok(ConvolutionReport { t, sup_error, location, fourier_error })
}

/// Outcome of the (d+2)-dimensional identity check.
#[derive(Debug, Clone, Serialize)]
pub struct DPlus2Report {
    pub t: f64,
    pub min_value: f64,
    pub mass: f64,
    pub bound_ratio: f64,
}

/// `q_t(r) = -∂_r p(t,r)/(2πr)` must be non-negative, integrate to one against
/// `4πr² dr` and stay below a multiple of `t𝒢^{(3)}(t, r)`.
pub fn dplus2_identity_check(kernel: &SymmetricKernel, t: f64) -> Result<DPlus2Report> {
    let plan = kernel.plan(t)?;
    let bounds = kernel.bounds();
    let s = bounds.phi_inv_fast(t);
    let q = |r: f64| -plan.derivatives(r).dp / (2.0 * std::f64::consts::PI * r);
    let mut min_value = f64::INFINITY;
    let mut bound_ratio: f64 = 0.0;
    for r in geometric_breaks(1e-3 * s, 30.0, 1.05) {
        let v = q(r);
        min_value = min_value.min(v);
        bound_ratio = bound_ratio.max(v / (t * bounds.g_dim(3, t, r)));
    }
    let upper = 200.0f64.max(20.0 * s);
    let mut breaks = vec![0.0];
    breaks.extend(geometric_breaks(1e-3 * s, upper, 1.5));
    let mass = adaptive_gk_breaks(|r| -2.0 * r * plan.derivatives(r).dp, &breaks, 1e-12, 1e-10, "dplus2 mass")?;
    Ok(DPlus2Report { t, min_value, mass, bound_ratio })
}

/// Ratios of the continuity-in-𝔎 estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub norm: f64,
    pub value_ratio: f64,
    pub gradient_ratio: f64,
}

/// `sup |p^{𝔎₁} - p^{𝔎₂}| / (‖𝔎₁-𝔎₂‖_∞ t𝒢(t,x))` and the gradient analogue on a `(t, x)` grid.
pub fn kernel_continuity_in_k(
    k1: &SymmetricKernel,
    k2: &SymmetricKernel,
    norm: f64,
    times: &[f64],
    xs: &[f64],
) -> Result<ContinuityReport> {
    let bounds = k1.bounds();
    let mut value_ratio: f64 = 0.0;
    let mut gradient_ratio: f64 = 0.0;
    for &t in times {
        let (p1, p2) = (k1.plan(t)?, k2.plan(t)?);
        let s = bounds.phi_inv_fast(t);
        for &x in xs {
            let (d1, d2) = (p1.derivatives(x), p2.derivatives(x));
            let env = t * bounds.g(t, x);
            if norm == 0.0 {
                value_ratio = value_ratio.max((d1.p - d2.p).abs());
                gradient_ratio = gradient_ratio.max((d1.dp - d2.dp).abs());
                continue;
            }
            value_ratio = value_ratio.max((d1.p - d2.p).abs() / (norm * env));
            gradient_ratio = gradient_ratio.max((d1.dp - d2.dp).abs() * s / (norm * env));
        }
    }
    Ok(ContinuityReport { norm, value_ratio, gradient_ratio })
}

/// A sampled function on a `(t, x)` or `(t, x, y)` grid, stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelField {
    pub label: String,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Option<Vec<f64>>,
    pub values: Vec<f64>,
    pub metadata: serde_json::Value,
}

impl KernelField {
    pub fn new(
        label: &str,
        times: Vec<f64>,
        xs: Vec<f64>,
        ys: Option<Vec<f64>>,
        values: Vec<f64>,
        metadata: serde_json::Value,
    ) -> Self {
        KernelField { label: label.to_string(), times, xs, ys, values, metadata }
    }

    fn inner(&self) -> usize {
        self.xs.len() * self.ys.as_ref().map_or(1, |y| y.len())
    }

    /// Value at `(t_i, x_j)` or `(t_i, x_j, y_k)`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let ny = self.ys.as_ref().map_or(1, |y| y.len());
        self.values[i * self.inner() + j * ny + k]
    }

    /// Most negative value (zero if none).
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::min)
    }

    /// Writes `t,x[,y],value` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        match &self.ys {
            None => {
                writeln!(w, "t,x,value")?;
                for (i, t) in self.times.iter().enumerate() {
                    for (j, x) in self.xs.iter().enumerate() {
                        writeln!(w, "{t:.16e},{x:.16e},{:.16e}", self.get(i, j, 0))?;
                    }
                }
            }
            Some(ys) => {
                writeln!(w, "t,x,y,value")?;
                for (i, t) in self.times.iter().enumerate() {
                    for (j, x) in self.xs.iter().enumerate() {
                        for (k, y) in ys.iter().enumerate() {
                            writeln!(w, "{t:.16e},{x:.16e},{y:.16e},{:.16e}", self.get(i, j, k))?;
                        }
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the grid and metadata sidecar.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let doc = serde_json::json!({
            "label": self.label,
            "times": self.times,
            "xs": self.xs,
            "ys": self.ys,
            "metadata": self.metadata,
        });
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::ModelSpec;
    use std::sync::LazyLock;

    static MODEL: LazyLock<LevyModel> = LazyLock::new(|| LevyModel::new(ModelSpec::default()).unwrap());
    static MODEL_ONE: LazyLock<LevyModel> =
        LazyLock::new(|| LevyModel::new(ModelSpec { beta: 1.0, ..ModelSpec::default() }).unwrap());

    fn unit(model: &LevyModel) -> SymmetricKernel {
        SymmetricKernel::new(model, FreezeKernel::Constant(1.0)).unwrap()
    }

    /// Independent inversion by adaptive quadrature of `cos(ξx)e^{-tψ(ξ)}`
    /// against exact ψ on short panels.
    fn oracle_p(model: &LevyModel, t: f64, x: f64) -> f64 {
        let k = FreezeKernel::Constant(1.0);
        let top = model.unit_table().unwrap();
        let sym = Symbol::scaled(top, 1.0);
        let xi_max = sym.level_crossing(t, 50.0);
        let n = 400;
        let mut breaks: Vec<f64> = (0..=n).map(|i| xi_max * i as f64 / n as f64).collect();
        breaks[0] = 0.0;
        let v = adaptive_gk_breaks(
            |xi| (xi * x).cos() * (-t * crate::levy_model::psi_direct(&k, model.jump().as_ref(), xi).unwrap().0).exp(),
            &breaks,
            1e-13,
            1e-12,
            "oracle",
        )
        .unwrap();
        v / std::f64::consts::PI
    }

    #[test]
    fn inversion_matches_independent_quadrature() {
        let k = unit(&MODEL);
        for &(t, x) in &[(0.1, 0.0), (0.1, 0.3), (0.5, 2.0), (1.0, 5.0), (0.02, 0.05)] {
            let v = k.p(t, x).unwrap();
            let o = oracle_p(&MODEL, t, x);
            assert!((v - o).abs() < 1e-9 * o.abs().max(1e-3), "t={t} x={x}: {v} vs {o}");
        }
    }

    #[test]
    fn density_is_even_and_derivative_odd() {
        let k = unit(&MODEL);
        let plan = k.plan(0.25).unwrap();
        for &x in &[0.01, 0.4, 3.0, 17.0] {
            assert_eq!(plan.value(x), plan.value(-x));
            let (a, b) = (plan.derivatives(x), plan.derivatives(-x));
            assert_eq!(a.dp, -b.dp);
            assert_eq!(a.d2p, b.d2p);
        }
        assert_eq!(plan.derivatives(0.0).dp, 0.0);
    }

    #[test]
    fn mass_is_one() {
        for model in [&*MODEL, &*MODEL_ONE] {
            let k = unit(model);
            for &t in &[0.05, 0.5, 1.0] {
                let m = k.mass(t).unwrap();
                assert!(m.deviation < 1e-6, "t={t}: {m:?}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = unit(&MODEL);
        for &t in &[0.05, 0.3, 1.0] {
            let s = k.bounds().phi_inv_fast(t);
            let xs: Vec<f64> = [0.3, 0.7, 1.5, 3.0, 6.0].iter().map(|c| c * s).collect();
            let r = k.derivative_fd_check(t, &xs).unwrap();
            assert!(r.value < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn generator_of_cosine_is_minus_psi_one() {
        let jump = MODEL.jump().clone();
        let k = FreezeKernel::Constant(1.0);
        let psi1 = MODEL.psi_eval(1.0, &k).unwrap();
        for &x in &[0.0, 0.7, 2.0] {
            let v = generator_apply(f64::cos, x, &k, jump.as_ref(), 0.0, 1.0).unwrap();
            assert!((v + x.cos() * psi1).abs() < 1e-8 * psi1, "x={x}: {v}");
        }
        let c = generator_apply(|_| 3.0, 0.2, &k, jump.as_ref(), 0.0, 1.0).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn time_derivative_matches_generator() {
        let k = SymmetricKernel::new(&MODEL, FreezeKernel::Gaussian { base: 0.8, amplitude: 0.3, width: 0.5 }).unwrap();
        let t = 0.2;
        let s = k.bounds().phi_inv_fast(t);
        let xs: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|c| c * s).collect();
        let r = k.generator_residual(t, &xs).unwrap();
        assert!(r.value < 1e-6, "{r:?}");
    }

    #[test]
    fn unimodal_and_chapman_kolmogorov() {
        let k = unit(&MODEL);
        assert!(k.unimodality_violation(0.1).unwrap() <= 1e-10);
        let ck = k.chapman_kolmogorov(0.1, 0.25).unwrap();
        assert!(ck.value < 1e-8, "{ck:?}");
    }

    #[test]
    fn convolution_identity_holds() {
        let r = convolution_identity_check(&MODEL, &FreezeKernel::Constant(1.0), 0.7, 0.5).unwrap();
        assert!(r.sup_error < 1e-8 && r.fourier_error < 1e-12, "{r:?}");
    }

    #[test]
    fn dplus2_mass_and_sign() {
        let k = unit(&MODEL_ONE);
        let r = dplus2_identity_check(&k, 0.3).unwrap();
        assert!(r.min_value >= -1e-12 && (r.mass - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn scaled_kernel_is_time_change() {
        let k1 = unit(&MODEL);
        let kc = SymmetricKernel::new(&MODEL, FreezeKernel::Constant(0.7)).unwrap();
        for &x in &[0.0, 0.2, 1.1] {
            let a = kc.p(0.4, x).unwrap();
            let b = k1.p(0.28, x).unwrap();
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn field_round_trip_to_csv() {
        let k = unit(&MODEL);
        let f = k.field(&[0.1, 0.2], &[0.0, 0.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        f.write_csv(&path).unwrap();
        f.write_sidecar(&dir.path().join("p.json")).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,value"));
        let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row[2], f.get(0, 1, 0));
    }
}
