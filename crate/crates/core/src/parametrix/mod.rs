//! Levi construction of the heat kernel `p^κ(t, x, y)` of
//! `L^κ f(x) = ∫ (f(x+z) - f(x)) κ(x, z) J(|z|) dz` in dimension one.
//!
//! The construction is carried out on the lattice `x_i = i·h` of one period
//! cell of κ, with values stored at offsets `y - x = v·h`, `|v| ≤ J`.  On the
//! lattice the frozen kernels are the band-limited kernels of the bank, so the
//! discrete sums `h Σ_y p^κ(t, x, y)` are exact up to the band truncation and
//! the time quadrature:
//!
//! * `q₀(t, x, y) = (c(x) - c(y)) H_y(t, x - y)`,
//! * `q_n(t) = ∫₀^t q₀(t-s) ⊛ q_{n-1}(s) ds`, `q = Σ q_n`,
//! * `φ_y(t, x) = ∫₀^t P(t-s) ⊛ q(s) ds`,
//!
//! where `⊛` is the lattice sum over the intermediate point.  Pointwise values
//! are `p^κ = p_y(t, x - y) + φ_y(t, x)` with the continuous frozen kernel.
//! Time integrals use product integration on a graded master grid, with `q`
//! interpolated by piecewise cubics.

pub mod bank;
pub mod grid;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::levy_model::{radial_integral, FreezeKernel, KappaSpec, LevyModel};
use crate::quad::{geometric_breaks, GaussLegendre};
use crate::scale_functions::{beta_fn, BoundFunctions};
use crate::symmetric_heat_kernel::generator_apply;

pub use bank::{BandTable, FrozenKernelBank, FrozenRows};
pub use grid::TimeGrid;

/// Numerical parameters of the Levi construction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixConfig {
    /// Lattice nodes per period cell.
    pub cell_nodes: usize,
    /// Half-width of the stored band `|y - x| ≤ band`.
    pub band: f64,
    /// Picard truncation, relative to the weighted norm of `q₀`.
    pub tol: f64,
    pub max_terms: usize,
    /// First positive node of the geometric master time grid.
    pub t_min: f64,
    pub time_ratio: f64,
    /// Smallest positive σ of the frozen-kernel tables.
    pub sigma_min: f64,
    pub sigma_per_decade: usize,
    /// Times inserted exactly into the master grid.
    pub required_times: Vec<f64>,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        ParametrixConfig {
            cell_nodes: 128,
            band: 10.0,
            tol: 1e-8,
            max_terms: 60,
            t_min: 2.5e-4,
            time_ratio: 1.3,
            sigma_min: 1e-6,
            sigma_per_decade: 24,
            required_times: vec![0.01, 0.025, 0.05, 0.1, 0.2, 0.25, 0.4, 0.5, 1.0],
        }
    }
}

impl ParametrixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_nodes < 16 || self.cell_nodes % 2 != 0 {
            return Err(Error::param("parametrix.cell_nodes", "must be even and at least 16"));
        }
        if !(self.band > 0.0 && self.band.is_finite()) {
            return Err(Error::param("parametrix.band", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::param("parametrix.tol", "must lie in (0, 1)"));
        }
        if self.max_terms < 2 {
            return Err(Error::param("parametrix.max_terms", "must be at least 2"));
        }
        if !(self.sigma_min > 0.0) || self.sigma_per_decade < 4 {
            return Err(Error::param("parametrix.sigma_min", "table range must be positive with at least 4 nodes per decade"));
        }
        Ok(())
    }

    /// The same construction with `factor` times more lattice nodes.
    pub fn refined(&self, factor: f64) -> Self {
        let nodes = ((self.cell_nodes as f64 * factor / 2.0).round() as usize * 2).max(16);
        ParametrixConfig { cell_nodes: nodes, ..self.clone() }
    }
}

/// Weighted sup norms `‖q_n‖_w = sup |q_n| / (𝒢_{δ₀}^0 + 𝒢_0^{δ₀})` of the Picard terms.
#[derive(Debug, Clone, Serialize)]
pub struct PicardTrace {
    pub norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `B(δ₀/2, (n+1)δ₀/2)`, the n-dependent factor of the analytic term ratio.
    pub beta_factors: Vec<f64>,
    pub delta0: f64,
    pub tol: f64,
    pub converged: bool,
}

/// A function of `(x_i, x_i + v h)` on the lattice, stored row-major in `i`.
#[derive(Debug, Clone)]
pub struct LatticeField {
    pub t: f64,
    pub n: usize,
    pub half: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

impl LatticeField {
    #[inline]
    pub fn get(&self, i: usize, v: i64) -> f64 {
        self.values[i * (2 * self.half + 1) + (v + self.half as i64) as usize]
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn offset(&self, v: i64) -> f64 {
        v as f64 * self.h
    }

    /// Smallest value with its `(i, v)`.
    pub fn min(&self) -> (f64, usize, i64) {
        let o = 2 * self.half + 1;
        let (k, v) = self.values.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        (v, k / o, (k % o) as i64 - self.half as i64)
    }
}

/// Supremum with its location.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LatticeSup {
    pub value: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl LatticeSup {
    fn zero(t: f64) -> Self {
        LatticeSup { value: 0.0, t, x: 0.0, y: 0.0 }
    }

    fn update(&mut self, value: f64, x: f64, y: f64) {
        if value > self.value || value.is_nan() {
            self.value = value;
            self.x = x;
            self.y = y;
        }
    }
}

/// Lattice, bank and q₀ of a construction, before the Picard iteration.
#[derive(Debug)]
pub struct LeviSetup {
    model: LevyModel,
    kappa: KappaSpec,
    config: ParametrixConfig,
    bank: FrozenKernelBank,
    grid: TimeGrid,
    n: usize,
    half: usize,
    h: f64,
    cell: f64,
    delta0: f64,
    inv_weight: Vec<f64>,
    q0: Vec<Vec<f64>>,
}

impl LeviSetup {
    pub fn new(model: &LevyModel, kappa: &KappaSpec, config: &ParametrixConfig) -> Result<Self> {
        config.validate()?;
        kappa.validate()?;
        if model.spec().d != 1 {
            return Err(Error::param("d", "the Levi construction is implemented for d = 1"));
        }
        let horizon = model.spec().horizon;
        let cell = kappa.period().unwrap_or(2.0 * std::f64::consts::PI);
        let n = config.cell_nodes;
        let h = cell / n as f64;
        let half = (config.band / h).ceil() as usize;
        let grid = TimeGrid::new(config.t_min, horizon, config.time_ratio, &config.required_times)?;
        let bank = FrozenKernelBank::build(
            model,
            kappa,
            n,
            cell,
            half,
            horizon * 1.01,
            config.sigma_min,
            config.sigma_per_decade,
        )?;
        let (_, alpha1) = model.bounds().lower_scaling();
        let (_, delta) = kappa.holder();
        let delta0 = delta.min(alpha1 / 4.0);
        let bounds = model.bounds();
        let wd = half + 1;
        let mut inv_weight = vec![0.0; grid.len() * wd];
        for (i, &t) in grid.nodes().iter().enumerate().skip(1) {
            for v in 0..wd {
                let r = v as f64 * h;
                let w = bounds.g_gamma_delta(delta0, 0.0, t, r) + bounds.g_gamma_delta(0.0, delta0, t, r);
                inv_weight[i * wd + v] = 1.0 / w;
            }
        }
        let mut setup = LeviSetup {
            model: model.clone(),
            kappa: kappa.clone(),
            config: config.clone(),
            bank,
            grid,
            n,
            half,
            h,
            cell,
            delta0,
            inv_weight,
            q0: Vec::new(),
        };
        setup.q0 = setup.grid.nodes().iter().map(|&t| setup.q0_lattice(t)).collect();
        Ok(setup)
    }

    fn width(&self) -> usize {
        2 * self.half + 1
    }

    /// Lattice `q₀(t, x_i, x_i + vh)`.
    pub fn q0_lattice(&self, t: f64) -> Vec<f64> {
        let wd = self.half + 1;
        let o = self.width();
        let mut rows = vec![0.0; self.n * wd];
        self.bank.q0_rows(t, &mut rows);
        let c = self.bank.coef();
        let jj = self.half as i64;
        let mut out = vec![0.0; self.n * o];
        for i in 0..self.n {
            for v in -jj..=jj {
                let z = (i as i64 + v).rem_euclid(self.n as i64) as usize;
                out[i * o + (v + jj) as usize] = (c[i] - c[z]) * rows[z * wd + v.unsigned_abs() as usize];
            }
        }
        out
    }

    /// `sup |f| / (𝒢_{δ₀}^0 + 𝒢_0^{δ₀})` over the positive master times.
    fn weighted_norm(&self, fields: &[Vec<f64>]) -> f64 {
        let o = self.width();
        let wd = self.half + 1;
        let jj = self.half as i64;
        let mut worst = 0.0f64;
        for (i, f) in fields.iter().enumerate().skip(1) {
            for row in f.chunks(o) {
                for v in -jj..=jj {
                    let val = row[(v + jj) as usize].abs() * self.inv_weight[i * wd + v.unsigned_abs() as usize];
                    worst = worst.max(val);
                }
            }
        }
        worst
    }

    /// `‖q₀‖_w`.
    pub fn q0_weighted_norm(&self) -> f64 {
        self.weighted_norm(&self.q0)
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Runs the Picard iteration and assembles the correction φ at the master times.
    pub fn solve(self) -> Result<Parametrix> {
        let m = self.grid.len();
        let wd = self.half + 1;
        let o = self.width();
        let len = self.n * o;
        let q0_norm = self.q0_weighted_norm();
        let mut trace = PicardTrace {
            norms: vec![q0_norm],
            ratios: Vec::new(),
            beta_factors: Vec::new(),
            delta0: self.delta0,
            tol: self.config.tol,
            converged: q0_norm == 0.0,
        };
        let mut q = self.q0.clone();
        if !trace.converged {
            let weights: Vec<Vec<(usize, Vec<f64>)>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    if i == 0 {
                        Vec::new()
                    } else {
                        self.grid.weights(self.grid.nodes()[i], self.n * wd, |tau, out| self.bank.q0_rows(tau, out))
                    }
                })
                .collect();
            let mut prev = self.q0.clone();
            for term in 1..self.config.max_terms {
                let mut next = vec![vec![0.0; len]; m];
                for i in 1..m {
                    for (j, u) in &weights[i] {
                        if term > 1 && *j == 0 {
                            continue;
                        }
                        convolve_rows(&mut next[i], u, Some(self.bank.coef()), &prev[*j], self.n, self.half, self.h);
                    }
                }
                let norm = self.weighted_norm(&next);
                if !norm.is_finite() {
                    return Err(Error::NonFinite { value: norm, location: format!("Picard term {term}") });
                }
                let last = *trace.norms.last().expect("trace starts with q0");
                trace.ratios.push(norm / last);
                trace.beta_factors.push(beta_fn(self.delta0 / 2.0, (term as f64 + 1.0) * self.delta0 / 2.0)?);
                trace.norms.push(norm);
                for (qi, ni) in q.iter_mut().zip(&next) {
                    for (a, b) in qi.iter_mut().zip(ni) {
                        *a += b;
                    }
                }
                if norm <= self.config.tol * q0_norm {
                    trace.converged = true;
                    break;
                }
                prev = next;
            }
            if !trace.converged {
                let ratio = trace.ratios.last().copied().unwrap_or(f64::NAN);
                return Err(Error::Divergence { terms: self.config.max_terms, ratio });
            }
        }
        let mut parametrix = Parametrix {
            setup: self,
            q,
            phi: Vec::new(),
            trace,
            phi_cache: Mutex::new(HashMap::new()),
            rows_cache: Mutex::new(HashMap::new()),
        };
        let phi: Vec<Vec<f64>> = (0..m).map(|i| parametrix.phi_compute(parametrix.setup.grid.nodes()[i])).collect();
        parametrix.phi = phi;
        Ok(parametrix)
    }
}

/// `out[x][v] += h Σ_w c_xz · rows[z][|w|] · src[z][v-w]` with `z = x + w`,
/// where `c_xz = c(x) - c(z)` when a coefficient is given and 1 otherwise.
fn convolve_rows(out: &mut [f64], rows: &[f64], coef: Option<&[f64]>, src: &[f64], n: usize, half: usize, h: f64) {
    let o = 2 * half + 1;
    let wd = half + 1;
    let jj = half as i64;
    out.par_chunks_mut(o).enumerate().for_each(|(x, out_row)| {
        for w in -jj..=jj {
            let z = (x as i64 + w).rem_euclid(n as i64) as usize;
            let mut wt = h * rows[z * wd + w.unsigned_abs() as usize];
            if let Some(c) = coef {
                wt *= c[x] - c[z];
            }
            if wt == 0.0 {
                continue;
            }
            axpy_shifted(out_row, &src[z * o..(z + 1) * o], wt, w, jj);
        }
    });
}

/// `out[x][v] += h Σ_w a[x][w] · b[z][v-w]` with `z = x + w`.
fn convolve_fields(a: &[f64], b: &[f64], n: usize, half: usize, h: f64) -> Vec<f64> {
    let o = 2 * half + 1;
    let jj = half as i64;
    let mut out = vec![0.0; n * o];
    out.par_chunks_mut(o).enumerate().for_each(|(x, out_row)| {
        for w in -jj..=jj {
            let z = (x as i64 + w).rem_euclid(n as i64) as usize;
            let wt = h * a[x * o + (w + jj) as usize];
            if wt != 0.0 {
                axpy_shifted(out_row, &b[z * o..(z + 1) * o], wt, w, jj);
            }
        }
    });
    out
}

#[inline]
fn axpy_shifted(out_row: &mut [f64], src_row: &[f64], wt: f64, w: i64, jj: i64) {
    let (lo, hi) = ((-jj).max(w - jj), jj.min(w + jj));
    let dst = &mut out_row[(lo + jj) as usize..=(hi + jj) as usize];
    let src = &src_row[(lo - w + jj) as usize..=(hi - w + jj) as usize];
    for (d, s) in dst.iter_mut().zip(src) {
        *d += wt * s;
    }
}

/// The solved Levi construction.
#[derive(Debug)]
pub struct Parametrix {
    setup: LeviSetup,
    q: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    trace: PicardTrace,
    phi_cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    rows_cache: Mutex<HashMap<u64, Arc<FrozenRows>>>,
}

impl Parametrix {
    /// Builds the bank, iterates the Picard series and assembles φ.
    pub fn build(model: &LevyModel, kappa: &KappaSpec, config: &ParametrixConfig) -> Result<Self> {
        LeviSetup::new(model, kappa, config)?.solve()
    }

    pub fn trace(&self) -> &PicardTrace {
        &self.trace
    }

    pub fn config(&self) -> &ParametrixConfig {
        &self.setup.config
    }

    pub fn kappa(&self) -> &KappaSpec {
        &self.setup.kappa
    }

    pub fn bounds(&self) -> &BoundFunctions {
        self.setup.model.bounds()
    }

    pub fn model(&self) -> &LevyModel {
        &self.setup.model
    }

    /// Master time nodes, starting with 0.
    pub fn times(&self) -> &[f64] {
        self.setup.grid.nodes()
    }

    /// Lattice nodes per cell.
    pub fn nodes(&self) -> usize {
        self.setup.n
    }

    /// Largest stored offset index J.
    pub fn half_width(&self) -> usize {
        self.setup.half
    }

    /// Lattice step h.
    pub fn step(&self) -> f64 {
        self.setup.h
    }

    /// Period cell length.
    pub fn cell(&self) -> f64 {
        self.setup.cell
    }

    pub fn delta0(&self) -> f64 {
        self.setup.delta0
    }

    pub fn q0_weighted_norm(&self) -> f64 {
        self.trace.norms[0]
    }

    fn field(&self, t: f64, values: Vec<f64>) -> LatticeField {
        LatticeField { t, n: self.setup.n, half: self.setup.half, h: self.setup.h, values }
    }

    fn phi_compute(&self, t: f64) -> Vec<f64> {
        let s = &self.setup;
        let wd = s.half + 1;
        let mut out = vec![0.0; s.n * s.width()];
        if t <= 0.0 {
            return out;
        }
        let weights = s.grid.weights(t, s.n * wd, |tau, buf| s.bank.p_rows(tau, buf));
        for (j, v) in &weights {
            convolve_rows(&mut out, v, None, &self.q[*j], s.n, s.half, s.h);
        }
        out
    }

    /// φ at time `t ∈ [0, T]`, stored at master times and computed on demand otherwise.
    pub fn phi_values(&self, t: f64) -> Result<Arc<Vec<f64>>> {
        self.check_time(t)?;
        if let Some(i) = self.setup.grid.index_of(t) {
            if !self.phi.is_empty() {
                return Ok(Arc::new(self.phi[i].clone()));
            }
        }
        let key = t.to_bits();
        if let Some(v) = self.phi_cache.lock().expect("phi cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.phi_compute(t));
        let mut cache = self.phi_cache.lock().expect("phi cache poisoned");
        if cache.len() > 64 {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(v).clone())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.setup.model.spec().horizon * 1.01;
        if !(t > 0.0 && t <= horizon) {
            return Err(Error::domain("parametrix", format!("t = {t} outside (0, {horizon}]")));
        }
        Ok(())
    }

    fn frozen_rows(&self, t: f64) -> Result<Arc<FrozenRows>> {
        let key = t.to_bits();
        if let Some(v) = self.rows_cache.lock().expect("rows cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.setup.bank.frozen_rows(t)?);
        let mut cache = self.rows_cache.lock().expect("rows cache poisoned");
        if cache.len() > 64 {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(v).clone())
    }

    /// Lattice `q(t_i)` at a master time.
    pub fn q_field(&self, t: f64) -> Result<LatticeField> {
        let i = self
            .setup
            .grid
            .index_of(t)
            .ok_or_else(|| Error::domain("q_field", format!("t = {t} is not a master time")))?;
        Ok(self.field(t, self.q[i].clone()))
    }

    /// Lattice `q₀(t)`.
    pub fn q0_field(&self, t: f64) -> LatticeField {
        self.field(t, self.setup.q0_lattice(t))
    }

    /// Correction `φ_y(t, x)` on the lattice.
    pub fn phi_field(&self, t: f64) -> Result<LatticeField> {
        Ok(self.field(t, self.phi_values(t)?.as_ref().clone()))
    }

    /// Pointwise `p^κ(t, x_i, x_i + vh) = p_y(t, -vh) + φ_y(t, x_i)`.
    pub fn p_kappa_field(&self, t: f64) -> Result<LatticeField> {
        let phi = self.phi_values(t)?;
        let rows = self.frozen_rows(t)?;
        Ok(self.field(t, self.add_rows(&rows.p, &phi)))
    }

    /// Lattice kernel `P_y(t, -vh) + φ_y(t, x_i)` with the band-limited frozen kernel.
    pub fn p_lattice_field(&self, t: f64) -> Result<LatticeField> {
        let s = &self.setup;
        let phi = self.phi_values(t)?;
        let mut rows = vec![0.0; s.n * (s.half + 1)];
        s.bank.p_rows(t, &mut rows);
        Ok(self.field(t, self.add_rows(&rows, &phi)))
    }

    fn add_rows(&self, rows: &[f64], phi: &[f64]) -> Vec<f64> {
        let s = &self.setup;
        let o = s.width();
        let wd = s.half + 1;
        let jj = s.half as i64;
        let mut out = phi.to_vec();
        for i in 0..s.n {
            for v in -jj..=jj {
                let z = (i as i64 + v).rem_euclid(s.n as i64) as usize;
                out[i * o + (v + jj) as usize] += rows[z * wd + v.unsigned_abs() as usize];
            }
        }
        out
    }

    /// Frozen kernel beyond the band: `Σ_m w_m-block · p_y(t, ±w_m) f(x ± w_m)` at node `i`.
    fn far_tail<F: Fn(f64) -> f64>(&self, t: f64, i: usize, f: F) -> f64 {
        let bank = &self.setup.bank;
        let x = i as f64 * self.setup.h;
        let mut s = 0.0;
        for (m, &w) in bank.far_offsets().iter().enumerate() {
            s += bank.far_value(t, x + w, m) * f(w) + bank.far_value(t, x - w, m) * f(-w);
        }
        s * bank.far_weight()
    }

    /// `∫ p^κ(t, x_i, y) dy` at every node, from the lattice kernel plus the far tail of `p_y`.
    pub fn mass(&self, t: f64) -> Result<Vec<f64>> {
        let p = self.p_lattice_field(t)?;
        let o = 2 * p.half + 1;
        Ok((0..p.n)
            .map(|i| p.h * p.values[i * o..(i + 1) * o].iter().sum::<f64>() + self.far_tail(t, i, |_| 1.0))
            .collect())
    }

    /// `sup |∫ p^κ(t,x,z) p^κ(s,z,y) dz - p^κ(t+s,x,y)|` over `|x - y| ≤ band/2`.
    pub fn chapman_kolmogorov(&self, t: f64, s: f64) -> Result<LatticeSup> {
        let a = self.p_lattice_field(t)?;
        let b = self.p_lattice_field(s)?;
        let c = self.p_lattice_field(t + s)?;
        let st = &self.setup;
        let composed = convolve_fields(&a.values, &b.values, st.n, st.half, st.h);
        let jj = st.half as i64;
        let lim = jj / 2;
        let mut worst = LatticeSup::zero(t + s);
        for i in 0..st.n {
            for v in -lim..=lim {
                let k = i * st.width() + (v + jj) as usize;
                worst.update((composed[k] - c.values[k]).abs(), c.x(i), c.x(i) + c.offset(v));
            }
        }
        Ok(worst)
    }

    /// `P_t f(x)` at `x = x_i + k·cell` for the given cell shifts `k`.
    pub fn apply<F: Fn(f64) -> f64 + Sync>(&self, t: f64, f: F, shifts: std::ops::RangeInclusive<i64>) -> Result<Vec<(f64, f64)>> {
        let p = self.p_lattice_field(t)?;
        let jj = p.half as i64;
        let o = 2 * p.half + 1;
        let mut out = Vec::new();
        for k in shifts {
            let base = k as f64 * self.setup.cell;
            let vals: Vec<(f64, f64)> = (0..p.n)
                .into_par_iter()
                .map(|i| {
                    let x = base + p.x(i);
                    let row = &p.values[i * o..(i + 1) * o];
                    let mut acc = 0.0;
                    for v in -jj..=jj {
                        acc += row[(v + jj) as usize] * f(x + p.offset(v));
                    }
                    (x, p.h * acc + self.far_tail(t, i, |w| f(x + w)))
                })
                .collect();
            out.extend(vals);
        }
        Ok(out)
    }

    /// `L^κ f(x)` for a smooth `f` by singular quadrature.
    pub fn generator(&self, f: impl Fn(f64) -> f64, x: f64, scale: f64) -> Result<f64> {
        generator_apply(f, x, &self.setup.kappa.freeze(x), self.setup.model.jump().as_ref(), 0.0, scale)
    }

    /// Lattice generator `L_h φ(t)` applied in the x-variable.
    fn lattice_generator(&self, phi: &[f64]) -> Vec<f64> {
        let s = &self.setup;
        let mut out = vec![0.0; phi.len()];
        for (coef, g) in s.bank.lattice_generator() {
            let mut part = vec![0.0; phi.len()];
            let rows: Vec<f64> = (0..s.n).flat_map(|_| g.iter().copied()).collect();
            convolve_rows(&mut part, &rows, None, phi, s.n, s.half, s.h);
            let o = s.width();
            for i in 0..s.n {
                for k in 0..o {
                    out[i * o + k] += coef[i] * part[i * o + k];
                }
            }
        }
        out
    }

    /// `L^κ p_y(t, · - y)(x_i)` for the continuous frozen part, `y = x_i + vh`.
    fn frozen_generator(&self, t: f64, rows: &FrozenRows, i: usize, v: i64, eps: f64) -> Result<f64> {
        let s = &self.setup;
        let z = (i as i64 + v).rem_euclid(s.n as i64) as usize;
        if eps == 0.0 && s.bank.is_factorized() {
            return Ok(s.bank.coef()[i] * rows.generator[z * (s.half + 1) + v.unsigned_abs() as usize]);
        }
        let (kernel, scale) = s.bank.kernel(z);
        let plan = kernel.plan(scale * t)?;
        let xi = i as f64 * s.h;
        let y = xi + v as f64 * s.h;
        let len = s.model.bounds().phi_inv_fast(scale * t);
        generator_apply(|u| plan.value(u - y), xi, &s.kappa.freeze(xi), s.model.jump().as_ref(), eps, len)
    }

    /// `L^{κ,ε} φ_y(t, ·)(x_i)` for `ε > 0`, with φ interpolated by monotone cubics in x.
    fn phi_generator_eps(&self, phi: &[f64], i: usize, v: i64, eps: f64) -> Result<f64> {
        let s = &self.setup;
        let jj = s.half as i64;
        let o = s.width();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for m in (v - jj)..=(v + jj) {
            let node = (i as i64 + m).rem_euclid(s.n as i64) as usize;
            xs.push(m as f64 * s.h);
            ys.push(phi[node * o + (v - m + jj) as usize]);
        }
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let interp = MonotoneCubic::new(xs, ys)?;
        let f = |u: f64| if u < lo || u > hi { 0.0 } else { interp.eval(u) };
        let xi = i as f64 * s.h;
        let kernel = s.kappa.freeze(xi);
        let jump = s.model.jump();
        let f0 = f(0.0);
        let rule = lattice_rule();
        let mut total = 0.0;
        let first = s.h.max(eps);
        let mut breaks = if eps < s.h { geometric_breaks(eps, s.h, 2.0) } else { vec![eps] };
        let mut k = (first / s.h).ceil();
        let reach = (hi - lo).max(2.0 * s.config.band);
        while k * s.h <= reach {
            if k * s.h > *breaks.last().expect("non-empty") {
                breaks.push(k * s.h);
            }
            k += 1.0;
        }
        for w in breaks.windows(2) {
            let (c, hw) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (node, wt) in rule.nodes.iter().zip(&rule.weights) {
                let z = c + hw * node;
                total += wt * hw * (f(z) + f(-z) - 2.0 * f0) * kernel.eval(z) * jump.j(z);
            }
        }
        let end = *breaks.last().expect("non-empty");
        let upper = jump.cutoff_radius().max(2.0 * end);
        if end < upper {
            total -= 2.0 * f0 * radial_integral(|z| kernel.eval(z) * jump.j(z), end, upper)?;
        }
        Ok(total)
    }

    /// `L^{κ,ε} p^κ(t, ·, y)(x_i)` at `y = x_i + vh`.  At ε = 0 the correction
    /// uses the lattice generator; for ε > 0 it is interpolated in x.
    pub fn l_eps(&self, t: f64, i: usize, v: i64, eps: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::domain("l_eps", format!("ε = {eps} outside [0, 1]")));
        }
        let rows = self.frozen_rows(t)?;
        let phi = self.phi_values(t)?;
        let frozen = self.frozen_generator(t, &rows, i, v, eps)?;
        let corr = if eps == 0.0 {
            let lg = self.lattice_generator(&phi);
            lg[i * self.setup.width() + (v + self.setup.half as i64) as usize]
        } else {
            self.phi_generator_eps(&phi, i, v, eps)?
        };
        Ok(frozen + corr)
    }

    /// Field of `L^κ p^κ(t, ·, y)(x)` at ε = 0 on the whole lattice.
    pub fn generator_field(&self, t: f64) -> Result<LatticeField> {
        let s = &self.setup;
        let rows = self.frozen_rows(t)?;
        let phi = self.phi_values(t)?;
        let mut out = self.lattice_generator(&phi);
        let jj = s.half as i64;
        let o = s.width();
        let vals: Vec<(usize, f64)> = (0..s.n * o)
            .into_par_iter()
            .map(|k| {
                let (i, v) = (k / o, (k % o) as i64 - jj);
                self.frozen_generator(t, &rows, i, v, 0.0).map(|g| (k, g))
            })
            .collect::<Result<_>>()?;
        for (k, g) in vals {
            out[k] += g;
        }
        Ok(self.field(t, out))
    }

    /// `∂_t p^κ` on the lattice: exact for the frozen part, central difference
    /// with step `1e-3 t` for φ.
    pub fn time_derivative_field(&self, t: f64) -> Result<LatticeField> {
        let s = &self.setup;
        let dt = 1e-3 * t;
        let plus = self.phi_values(t + dt)?;
        let minus = self.phi_values(t - dt)?;
        let mut out: Vec<f64> = plus.iter().zip(minus.iter()).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
        let jj = s.half as i64;
        let o = s.width();
        let wd = s.half + 1;
        let frozen: Vec<f64> = if s.bank.is_factorized() {
            let rows = self.frozen_rows(t)?;
            let mut d = vec![0.0; s.n * wd];
            for z in 0..s.n {
                let (_, scale) = s.bank.kernel(z);
                for a in 0..wd {
                    d[z * wd + a] = scale * rows.generator[z * wd + a];
                }
            }
            d
        } else {
            let rows = self.frozen_rows(t)?;
            rows.generator.clone()
        };
        for i in 0..s.n {
            for v in -jj..=jj {
                let z = (i as i64 + v).rem_euclid(s.n as i64) as usize;
                out[i * o + (v + jj) as usize] += frozen[z * wd + v.unsigned_abs() as usize];
            }
        }
        Ok(self.field(t, out))
    }

    /// Sup-relative residual of `∂_t p^κ = L^κ p^κ` over `x ≠ y`, `|x - y| ≤ band/2`.
    pub fn pde_residual(&self, t: f64) -> Result<LatticeSup> {
        let dt = self.time_derivative_field(t)?;
        let lp = self.generator_field(t)?;
        let jj = dt.half as i64;
        let lim = jj / 2;
        let mut scale = 0.0f64;
        for i in 0..dt.n {
            for v in -lim..=lim {
                if v != 0 {
                    scale = scale.max(dt.get(i, v).abs());
                }
            }
        }
        let mut worst = LatticeSup::zero(t);
        for i in 0..dt.n {
            for v in -lim..=lim {
                if v != 0 {
                    worst.update((dt.get(i, v) - lp.get(i, v)).abs() / scale, dt.x(i), dt.x(i) + dt.offset(v));
                }
            }
        }
        Ok(worst)
    }

    /// `q₀(t, x, y)` by singular quadrature of `½∫ δ_{p_y}(t, x-y; z)(κ(x,z) - κ(y,z)) J dz`.
    pub fn q0_direct(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let s = &self.setup;
        let kernel = s.kappa.freeze(y);
        let sym = crate::symmetric_heat_kernel::SymmetricKernel::new(&s.model, kernel)?;
        let plan = sym.plan(t)?;
        let kappa = s.kappa.clone();
        let diff = FreezeKernel::Custom {
            f: Arc::new(move |z| kappa.eval(x, z) - kappa.eval(y, z)),
            bounds: (-1.0, 1.0),
            label: "kappa difference".into(),
        };
        let scale = s.model.bounds().phi_inv_fast(t);
        generator_apply(|u| plan.value(u - y), x, &diff, s.model.jump().as_ref(), 0.0, scale)
    }
}

fn lattice_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

#[cfg(test)]
mod tests;
