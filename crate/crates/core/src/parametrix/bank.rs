//! Frozen kernels `p_z` at the lattice anchors, tabulated for the Levi sums.
//!
//! On the lattice `hℤ` the operator with frozen coefficient `𝔎_z` has the
//! band-limited kernel `P_z(τ, w) = (1/π)∫₀^{π/h} cos(ξw) e^{-τψ_z(ξ)} dξ`,
//! whose lattice sums are exactly one.  The bank stores `P_z` and the q₀
//! kernel `H_z(τ, w) = -(1/π)∫₀^{π/h} m(ξ) cos(ξw) e^{-τψ_z(ξ)} dξ` on a
//! log-uniform σ-grid, where `m` is the exponent of the x-dependent part of κ.
//! The lattice symbols are tapered near `π/h` (see [`InversionPlan::lattice`]).
//! When κ factorizes as `a(x)·1`, every `ψ_z` is `a(z)ψ` and a single table in
//! `σ = a(z)τ` serves all anchors.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levy_model::{radial_integral, Coefficient, FreezeKernel, KappaSpec, LevyModel, Symbol};
use crate::symmetric_heat_kernel::{InversionPlan, SymmetricKernel};

/// Far-tail blocks are this many lattice steps wide.
const FAR_STRIDE: usize = 4;
/// The far tail stops where `∫_R^∞ J` falls below this.
const FAR_TAIL_MASS: f64 = 1e-10;
/// Below this σ the far table is linear in σ, matching `p(σ, w) ≈ σ𝔎(w)J(w)`.
const FAR_SIGMA_MIN: f64 = 1e-3;

/// Rows `f(σ, w_c)` for a fixed set of offsets `w_c`, interpolated cubically in `log σ`.
#[derive(Debug, Clone)]
pub struct BandTable {
    ln_s0: f64,
    s0: f64,
    step: f64,
    count: usize,
    width: usize,
    p: Vec<f64>,
    g: Vec<f64>,
}

enum Loc {
    Linear(f64),
    Cubic(usize, [f64; 4]),
}

impl BandTable {
    /// Tabulates `p` (channel 0) and the generator channel at the given offsets
    /// for `σ ∈ {0} ∪ [sigma_min, sigma_max]`.  Without a band the σ = 0 row is zero.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        symbol: &Symbol,
        multiplier: Option<&Symbol>,
        offsets: &[f64],
        band: Option<f64>,
        sigma_min: f64,
        sigma_max: f64,
        per_decade: usize,
        with_generator: bool,
    ) -> Result<Self> {
        let step = std::f64::consts::LN_10 / per_decade as f64;
        let count = (((sigma_max / sigma_min).ln() / step).ceil() as usize + 1).max(4);
        let width = offsets.len();
        let sigmas: Vec<f64> = std::iter::once(0.0)
            .chain((0..count).map(|k| sigma_min * (k as f64 * step).exp()))
            .collect();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = sigmas
            .par_iter()
            .map(|&s| -> Result<(Vec<f64>, Vec<f64>)> {
                if s == 0.0 && band.is_none() {
                    return Ok((vec![0.0; width], vec![0.0; width]));
                }
                let plan = match band {
                    Some(b) => InversionPlan::lattice(symbol, multiplier, s, b)?,
                    None => InversionPlan::with_multiplier(symbol, multiplier, s, None)?,
                };
                let mut p = Vec::with_capacity(width);
                let mut g = Vec::with_capacity(width);
                for &w in offsets {
                    if with_generator {
                        let (a, b) = plan.value_and_generator(w);
                        p.push(a);
                        g.push(b);
                    } else {
                        p.push(plan.value(w));
                    }
                }
                Ok((p, g))
            })
            .collect::<Result<_>>()?;
        let mut p = Vec::with_capacity((count + 1) * width);
        let mut g = Vec::with_capacity(if with_generator { (count + 1) * width } else { 0 });
        for (rp, rg) in rows {
            p.extend(rp);
            g.extend(rg);
        }
        if let Some(v) = p.iter().chain(&g).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { value: *v, location: "frozen kernel table".into() });
        }
        Ok(BandTable { ln_s0: sigma_min.ln(), s0: sigma_min, step, count, width, p, g })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn locate(&self, sigma: f64) -> Loc {
        if sigma <= 0.0 {
            return Loc::Linear(0.0);
        }
        if sigma < self.s0 {
            return Loc::Linear(sigma / self.s0);
        }
        let u = (sigma.ln() - self.ln_s0) / self.step;
        let i = (u.floor().max(0.0) as usize).min(self.count - 2);
        let start = i.saturating_sub(1).min(self.count - 4);
        let x = u - start as f64;
        let mut w = [1.0; 4];
        for m in 0..4 {
            for n in 0..4 {
                if n != m {
                    w[m] *= (x - n as f64) / (m as f64 - n as f64);
                }
            }
        }
        Loc::Cubic(start + 1, w)
    }

    fn interp_into(&self, data: &[f64], sigma: f64, out: &mut [f64]) {
        let wd = self.width;
        match self.locate(sigma) {
            Loc::Linear(f) => {
                let (r0, r1) = (&data[..wd], &data[wd..2 * wd]);
                for ((o, a), b) in out.iter_mut().zip(r0).zip(r1) {
                    *o = a + f * (b - a);
                }
            }
            Loc::Cubic(base, w) => {
                let r = |k: usize| &data[(base + k) * wd..(base + k + 1) * wd];
                let (a, b, c, d) = (r(0), r(1), r(2), r(3));
                for i in 0..wd {
                    out[i] = w[0] * a[i] + w[1] * b[i] + w[2] * c[i] + w[3] * d[i];
                }
            }
        }
    }

    /// Row of `p(σ, ·)`.
    pub fn p_into(&self, sigma: f64, out: &mut [f64]) {
        self.interp_into(&self.p, sigma, out);
    }

    /// Row of the generator channel at σ.
    pub fn g_into(&self, sigma: f64, out: &mut [f64]) {
        self.interp_into(&self.g, sigma, out);
    }

    /// Single entry of `p(σ, w_col)`.
    pub fn p_at(&self, sigma: f64, col: usize) -> f64 {
        let wd = self.width;
        match self.locate(sigma) {
            Loc::Linear(f) => self.p[col] + f * (self.p[wd + col] - self.p[col]),
            Loc::Cubic(base, w) => (0..4).map(|k| w[k] * self.p[(base + k) * wd + col]).sum(),
        }
    }
}

/// Continuous frozen-kernel rows at one time: `p_z(t, |v|h)` and the raw
/// generator channel, indexed `[z][|v|]`.
#[derive(Debug, Clone)]
pub struct FrozenRows {
    pub p: Vec<f64>,
    pub generator: Vec<f64>,
}

/// Frozen kernels at the lattice anchors of one period cell.
#[derive(Debug)]
pub struct FrozenKernelBank {
    n: usize,
    half: usize,
    h: f64,
    kappa: KappaSpec,
    factorized: bool,
    coef: Vec<f64>,
    scales: Vec<f64>,
    kernels: Vec<Arc<SymmetricKernel>>,
    tables: Vec<BandTable>,
    far: Vec<BandTable>,
    far_offsets: Vec<f64>,
    lattice_generator: Vec<(Vec<f64>, Vec<f64>)>,
}

impl FrozenKernelBank {
    /// Builds the bank for `n` anchors per cell of length `cell`, with lattice
    /// offsets up to `half` steps and tables covering times up to `t_max`.
    pub fn build(
        model: &LevyModel,
        kappa: &KappaSpec,
        n: usize,
        cell: f64,
        half: usize,
        t_max: f64,
        sigma_min: f64,
        per_decade: usize,
    ) -> Result<Self> {
        let h = cell / n as f64;
        let band = PI / h;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let offsets: Vec<f64> = (0..=half).map(|v| v as f64 * h).collect();
        let unit = model.unit_table()?;
        let unit_symbol = Symbol::scaled(unit.clone(), 1.0);
        let jump = model.jump().clone();

        let mut far_limit = half as f64 * h;
        let cutoff = jump.cutoff_radius();
        while far_limit < cutoff && radial_integral(|r| jump.j(r), far_limit, cutoff.max(far_limit * 2.0))? > FAR_TAIL_MASS {
            far_limit += 1.0;
        }
        let far_offsets: Vec<f64> = (0..)
            .map(|m| (half as f64 + 0.5 + (m as f64 + 0.5) * FAR_STRIDE as f64) * h)
            .take_while(|&w| w <= far_limit)
            .collect();

        let terms = kappa.separable();
        let mut lattice_generator = Vec::new();
        for (coef, profile) in &terms {
            let (symbol, factor) = match profile.constant_value() {
                Some(c) => (unit_symbol.clone(), c),
                None => (Symbol::scaled(model.table(profile)?, 1.0), 1.0),
            };
            let plan = InversionPlan::lattice(&symbol, None, 0.0, band)?;
            let g: Vec<f64> = offsets.iter().map(|&w| plan.value_and_generator(w).1).collect();
            let c: Vec<f64> = nodes.iter().map(|&x| factor * coef.eval(x)).collect();
            lattice_generator.push((c, g));
        }

        if kappa.is_factorized() {
            let a: Vec<f64> = nodes.iter().map(|&x| kappa.factor(x)).collect();
            let (k0, k1) = kappa.ellipticity();
            let smax = k1 * t_max * 1.05;
            let table = BandTable::build(&unit_symbol, None, &offsets, Some(band), sigma_min * k0, smax, per_decade, true)?;
            let far = BandTable::build(&unit_symbol, None, &far_offsets, None, FAR_SIGMA_MIN, smax, per_decade, false)?;
            let kernel = Arc::new(SymmetricKernel::with_symbol(model, FreezeKernel::Constant(1.0), unit_symbol));
            return Ok(FrozenKernelBank {
                n,
                half,
                h,
                kappa: kappa.clone(),
                factorized: true,
                coef: a.clone(),
                scales: a,
                kernels: vec![kernel],
                tables: vec![table],
                far: vec![far],
                far_offsets,
                lattice_generator,
            });
        }

        let varying: Vec<&(Coefficient, FreezeKernel)> =
            terms.iter().filter(|(c, _)| !matches!(c, Coefficient::Constant(_))).collect();
        if varying.len() != 1 {
            return Err(Error::param("kappa", "the anchor bank supports exactly one x-dependent separable term"));
        }
        let (vcoef, vprofile) = varying[0];
        let vtable = model.table(vprofile)?;
        let multiplier = Symbol::scaled(vtable.clone(), 1.0);
        let coef: Vec<f64> = nodes.iter().map(|&x| vcoef.eval(x)).collect();
        let smax = t_max * 1.05;
        let built: Vec<(Arc<SymmetricKernel>, BandTable, BandTable)> = nodes
            .par_iter()
            .map(|&z| -> Result<_> {
                let mut parts = Vec::new();
                for (c, profile) in &terms {
                    let cz = c.eval(z);
                    match profile.constant_value() {
                        Some(v) => parts.push((cz * v, unit.clone())),
                        None => parts.push((cz, vtable.clone())),
                    }
                }
                let symbol = Symbol::new(parts);
                let table = BandTable::build(&symbol, Some(&multiplier), &offsets, Some(band), sigma_min, smax, per_decade, true)?;
                let far = BandTable::build(&symbol, None, &far_offsets, None, FAR_SIGMA_MIN, smax, per_decade, false)?;
                let kernel = Arc::new(SymmetricKernel::with_symbol(model, kappa.freeze(z), symbol));
                Ok((kernel, table, far))
            })
            .collect::<Result<_>>()?;
        let mut kernels = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        let mut far = Vec::with_capacity(n);
        for (k, t, f) in built {
            kernels.push(k);
            tables.push(t);
            far.push(f);
        }
        Ok(FrozenKernelBank {
            n,
            half,
            h,
            kappa: kappa.clone(),
            factorized: false,
            coef,
            scales: vec![1.0; n],
            kernels,
            tables,
            far,
            far_offsets,
            lattice_generator,
        })
    }

    pub fn is_factorized(&self) -> bool {
        self.factorized
    }

    /// q₀ coefficient `c(x_i)` of the x-dependent part of κ.
    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    /// Continuous kernel of anchor `z` and its time scale: `p_z(t, w) = K.p(scale·t, w)`.
    pub fn kernel(&self, z: usize) -> (&Arc<SymmetricKernel>, f64) {
        let k = if self.factorized { &self.kernels[0] } else { &self.kernels[z] };
        (k, self.scales[z])
    }

    fn table(&self, z: usize) -> &BandTable {
        if self.factorized {
            &self.tables[0]
        } else {
            &self.tables[z]
        }
    }

    /// `H_z(τ, |v|h)` for all anchors, laid out `[z][|v|]`.
    pub fn q0_rows(&self, tau: f64, out: &mut [f64]) {
        let wd = self.half + 1;
        for (z, row) in out.chunks_mut(wd).enumerate() {
            self.table(z).g_into(self.scales[z] * tau, row);
        }
    }

    /// `P_z(τ, |v|h)` for all anchors, laid out `[z][|v|]`.
    pub fn p_rows(&self, tau: f64, out: &mut [f64]) {
        let wd = self.half + 1;
        for (z, row) in out.chunks_mut(wd).enumerate() {
            self.table(z).p_into(self.scales[z] * tau, row);
        }
    }

    /// Offsets `w_m` of the far-tail blocks beyond the band; each block has weight [`Self::far_weight`].
    pub fn far_offsets(&self) -> &[f64] {
        &self.far_offsets
    }

    pub fn far_weight(&self) -> f64 {
        FAR_STRIDE as f64 * self.h
    }

    /// Continuous `p_y(t, w_m)` for an off-lattice anchor `y` in the far tail.
    pub fn far_value(&self, t: f64, y: f64, m: usize) -> f64 {
        if self.factorized {
            self.far[0].p_at(self.kappa.factor(y) * t, m)
        } else {
            let z = ((y / self.h).round() as i64).rem_euclid(self.n as i64) as usize;
            self.far[z].p_at(t, m)
        }
    }

    /// Lattice generator terms `(a_i(x_j), g_i(|w|))` with
    /// `L_h f(x) = Σ_i a_i(x) h Σ_w g_i(|w|) f(x+w)`.
    pub fn lattice_generator(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.lattice_generator
    }

    /// Continuous frozen rows `p_z(t, |v|h)` and `∂_σ p` at `σ = scale_z·t`.
    pub fn frozen_rows(&self, t: f64) -> Result<FrozenRows> {
        let wd = self.half + 1;
        let mut cache: HashMap<(usize, u64), usize> = HashMap::new();
        let mut jobs: Vec<(usize, f64)> = Vec::new();
        let mut which = Vec::with_capacity(self.n);
        for z in 0..self.n {
            let kid = if self.factorized { 0 } else { z };
            let sigma = self.scales[z] * t;
            let key = (kid, sigma.to_bits());
            let idx = *cache.entry(key).or_insert_with(|| {
                jobs.push((kid, sigma));
                jobs.len() - 1
            });
            which.push(idx);
        }
        let rows: Vec<(Vec<f64>, Vec<f64>)> = jobs
            .par_iter()
            .map(|&(kid, sigma)| -> Result<_> {
                let plan = self.kernels[kid].plan(sigma)?;
                let mut p = Vec::with_capacity(wd);
                let mut g = Vec::with_capacity(wd);
                for v in 0..wd {
                    let (a, b) = plan.value_and_generator(v as f64 * self.h);
                    p.push(a);
                    g.push(b);
                }
                Ok((p, g))
            })
            .collect::<Result<_>>()?;
        let mut p = Vec::with_capacity(self.n * wd);
        let mut generator = Vec::with_capacity(self.n * wd);
        for idx in which {
            p.extend_from_slice(&rows[idx].0);
            generator.extend_from_slice(&rows[idx].1);
        }
        Ok(FrozenRows { p, generator })
    }
}
