//! Monte Carlo oracle for symmetric Lévy processes with jump kernel `𝔎(z)J(|z|)`.
//!
//! Jumps smaller than `ε_J` are replaced by a Brownian motion of the same
//! variance, larger jumps form a compound Poisson process whose sizes are drawn
//! by inverse transform from a tabulated tail `∫_r^∞ 𝔎J`.
//!
//! Paths are simulated in blocks of [`BLOCK`] paths.  Block `k` draws from the
//! ChaCha8 generator keyed by the run seed with stream number `k`, so results
//! are identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::levy_model::{radial_integral, FreezeKernel, JumpKernel, LevyModel, Symbol};
use crate::quad::{adaptive_gk, adaptive_gk_breaks, geometric_breaks};

/// Paths per RNG stream.
pub const BLOCK: usize = 4096;
/// Ratio of consecutive radii in the tail table.
const TAIL_RATIO: f64 = 1.05;
/// Fine steps per smallest probed exit horizon.
const EXIT_STEPS: f64 = 50.0;

/// User-facing sampler settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    /// `ε_J` as a fraction of the natural length scale of the experiment
    /// (`Φ⁻¹(t)` for increments, the radius for exit times).
    pub cutoff_factor: f64,
    pub paths: usize,
    pub seed: u64,
    pub kde_points: usize,
    pub exit_radii: Vec<f64>,
    pub exit_lambdas: Vec<f64>,
    pub exit_paths: usize,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            cutoff_factor: 0.01,
            paths: 200_000,
            seed: 20_240_917,
            kde_points: 20,
            exit_radii: vec![0.1, 0.3, 1.0],
            exit_lambdas: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            exit_paths: 100_000,
        }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_factor > 0.0 && self.cutoff_factor < 1.0) {
            return Err(Error::param("sampler.cutoff_factor", "must lie in (0, 1)"));
        }
        if self.paths < 1000 || self.exit_paths < 1000 {
            return Err(Error::param("sampler.paths", "at least 1000 paths are required"));
        }
        if self.kde_points < 2 {
            return Err(Error::param("sampler.kde_points", "at least two points are required"));
        }
        if self.exit_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::param("sampler.exit_radii", "radii must be positive"));
        }
        let lam = &self.exit_lambdas;
        if lam.is_empty() || lam.iter().any(|&l| !(l > 0.0)) || lam.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("sampler.exit_lambdas", "must be positive and strictly increasing"));
        }
        Ok(())
    }
}

/// Inverse transform for the jump sizes `|z| ≥ ε_J`.
#[derive(Debug, Clone)]
struct TailSampler {
    /// `-ln(G(r)/G(ε))` ↦ `ln r` with `G(r) = ∫_r^∞ 𝔎J`.
    inverse: MonotoneCubic,
    x_max: f64,
    r_max: f64,
}

impl TailSampler {
    fn build(kernel: &FreezeKernel, jump: &dyn JumpKernel, eps: f64) -> Result<(Self, f64)> {
        let r_max = jump.cutoff_radius() * 2.0;
        let radii = geometric_breaks(eps, r_max, TAIL_RATIO);
        let mut pieces = vec![0.0; radii.len()];
        for k in (0..radii.len() - 1).rev() {
            let piece = adaptive_gk(|r| kernel.eval(r) * jump.j(r), radii[k], radii[k + 1], 1e-300, 1e-12, "jump tail")?;
            pieces[k] = pieces[k + 1] + piece;
        }
        let total = pieces[0];
        let mut xs = Vec::with_capacity(radii.len());
        let mut ys = Vec::with_capacity(radii.len());
        for (r, g) in radii.iter().zip(&pieces) {
            if *g <= 0.0 {
                break;
            }
            let x = -(g / total).ln();
            if xs.last().is_some_and(|&prev: &f64| x <= prev) {
                continue;
            }
            xs.push(x);
            ys.push(r.ln());
        }
        let x_max = *xs.last().expect("tail table has at least one node");
        Ok((TailSampler { inverse: MonotoneCubic::new(xs, ys)?, x_max, r_max }, total))
    }

    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        let size = if e >= self.x_max { self.r_max } else { self.inverse.eval(e).exp() };
        if rng.random::<bool>() {
            size
        } else {
            -size
        }
    }
}

/// Small-jump cutoff with the derived Gaussian variance and jump rate.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub eps_j: f64,
    /// `σ²(ε_J) = ∫_{|z|<ε_J} z² 𝔎J dz`.
    pub sigma2: f64,
    /// `λ(ε_J) = ∫_{|z|≥ε_J} 𝔎J dz`.
    pub rate: f64,
    pub paths: usize,
    pub seed: u64,
    tail: TailSampler,
}

impl SamplerConfig {
    pub fn new(model: &LevyModel, kernel: &FreezeKernel, eps_j: f64, paths: usize, seed: u64) -> Result<Self> {
        if !(eps_j > 0.0 && eps_j < 1.0) {
            return Err(Error::param("sampler.eps_j", format!("must lie in (0, 1), got {eps_j}")));
        }
        if paths == 0 {
            return Err(Error::param("sampler.paths", "must be positive"));
        }
        let jump = model.jump().as_ref();
        let alpha = jump.small_exponent();
        let p = 2.0 / (2.0 - alpha);
        // r = ε u^p makes r² J(r) dr bounded at u = 0
        let half = adaptive_gk(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let up = u.powf(p);
                let r = eps_j * up;
                r * r * kernel.eval(r) * jump.j(r) * eps_j * p * up / u
            },
            0.0,
            1.0,
            0.0,
            1e-13,
            "small-jump variance",
        )?;
        let (tail, one_side) = TailSampler::build(kernel, jump, eps_j)?;
        Ok(SamplerConfig { eps_j, sigma2: 2.0 * half, rate: 2.0 * one_side, paths, seed, tail })
    }

    /// Per-block generator of the documented stream layout.
    pub fn block_rng(&self, block: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block as u64);
        rng
    }

    /// One increment over a time step `t`.
    pub fn sample_increment<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let g: f64 = rng.sample(StandardNormal);
        let mut x = (self.sigma2 * t).sqrt() * g;
        let mut clock: f64 = rng.sample::<f64, _>(Exp1) / self.rate;
        while clock < t {
            x += self.tail.sample(rng);
            clock += rng.sample::<f64, _>(Exp1) / self.rate;
        }
        x
    }

    /// `paths` independent increments over `t`, in block order.
    pub fn sample_increments(&self, t: f64) -> Vec<f64> {
        let blocks = self.paths.div_ceil(BLOCK);
        let chunks: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = self.block_rng(b);
                let count = BLOCK.min(self.paths - b * BLOCK);
                (0..count).map(|_| self.sample_increment(t, &mut rng)).collect()
            })
            .collect();
        chunks.concat()
    }
}

/// Gaussian kernel density estimate with pointwise standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct KdeField {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub se: Vec<f64>,
    pub expected_count: Vec<f64>,
    pub undersampled: Vec<bool>,
    pub bandwidth: f64,
    pub samples: usize,
}

/// Minimum expected sample count under the kernel window before a point is flagged.
pub const MIN_EXPECTED_COUNT: f64 = 20.0;
const KDE_MIN_PATHS: usize = 100_000;
const KDE_WINDOW: f64 = 8.0;

/// Silverman's rule `h = 0.9 min(σ̂, IQR/1.34) n^{-1/5}` on sorted samples.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let q = |p: f64| {
        let pos = p * (n - 1.0);
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        sorted[i] + f * (sorted[(i + 1).min(sorted.len() - 1)] - sorted[i])
    };
    let iqr = q(0.75) - q(0.25);
    0.9 * var.sqrt().min(iqr / 1.34) * n.powf(-0.2)
}

fn kde_point(sorted: &[f64], h: f64, x: f64) -> (f64, f64) {
    let lo = sorted.partition_point(|&v| v < x - KDE_WINDOW * h);
    let hi = sorted.partition_point(|&v| v <= x + KDE_WINDOW * h);
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let (mut s, mut s2) = (0.0, 0.0);
    for &v in &sorted[lo..hi] {
        let u = (x - v) / h;
        let k = norm * (-0.5 * u * u).exp();
        s += k;
        s2 += k * k;
    }
    let n = sorted.len() as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (mean, (var / (n - 1.0)).sqrt())
}

/// KDE of `samples` at `xs`.
pub fn kde_density(samples: &[f64], xs: &[f64]) -> Result<KdeField> {
    if samples.len() < KDE_MIN_PATHS {
        return Err(Error::param("kde.paths", format!("need at least {KDE_MIN_PATHS} samples, got {}", samples.len())));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted);
    let n = sorted.len() as f64;
    let (density, se): (Vec<f64>, Vec<f64>) = xs.iter().map(|&x| kde_point(&sorted, h, x)).unzip();
    let expected_count: Vec<f64> = density.iter().map(|d| d * 2.0 * h * n).collect();
    let undersampled = expected_count.iter().map(|&c| c < MIN_EXPECTED_COUNT).collect();
    Ok(KdeField { x: xs.to_vec(), density, se, expected_count, undersampled, bandwidth: h, samples: sorted.len() })
}

/// Total mass of the KDE by the trapezoid rule on a grid of spacing `h/2`
/// covering every sample.
pub fn kde_mass(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted);
    let step = 0.5 * h;
    let lo = sorted[0] - KDE_WINDOW * h;
    let hi = sorted[sorted.len() - 1] + KDE_WINDOW * h;
    let m = ((hi - lo) / step).ceil() as usize;
    // Points far from every sample contribute nothing; visit only occupied windows.
    let mut mass = 0.0;
    let mut k = 0usize;
    while k <= m {
        let x = lo + k as f64 * step;
        let next = sorted.partition_point(|&v| v < x - KDE_WINDOW * h);
        if next == sorted.len() {
            break;
        }
        if sorted[next] > x + KDE_WINDOW * h {
            let jump = ((sorted[next] - KDE_WINDOW * h - x) / step).floor() as usize;
            k += jump.max(1);
            continue;
        }
        mass += kde_point(&sorted, h, x).0 * step;
        k += 1;
    }
    mass
}

/// Expected value of the KDE, `(1/π)∫₀^∞ cos(ξx) e^{-tψ(ξ) - h²ξ²/2} dξ`.
pub fn smoothed_density(symbol: &Symbol, t: f64, h: f64, x: f64) -> Result<f64> {
    let mut hi = 1.0f64;
    while t * symbol.eval(hi) + 0.5 * h * h * hi * hi < 40.0 {
        hi *= 2.0;
    }
    let step = (std::f64::consts::PI / x.abs().max(1.0)).min(hi / 16.0);
    let n = (hi / step).ceil() as usize;
    let breaks: Vec<f64> = (0..=n).map(|k| hi * k as f64 / n as f64).collect();
    let v = adaptive_gk_breaks(
        |xi| (xi * x).cos() * (-t * symbol.eval(xi) - 0.5 * h * h * xi * xi).exp(),
        &breaks,
        1e-14,
        1e-10,
        "smoothed density",
    )?;
    Ok(v / std::f64::consts::PI)
}

/// Wilson score interval for `k` successes in `n` trials at confidence `level`.
pub fn wilson_interval(k: usize, n: usize, level: f64) -> (f64, f64) {
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + 0.5 * level);
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical exit probabilities from `B(0, r)` over a λ sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub r: f64,
    pub phi_r: f64,
    pub dt: f64,
    pub eps_j: f64,
    pub paths: usize,
    pub lambdas: Vec<f64>,
    pub probability: Vec<f64>,
    pub wilson_lo: Vec<f64>,
    pub wilson_hi: Vec<f64>,
    /// `E[τ ∧ λ_max Φ(r)] / Φ(r)`, a lower estimate of `E[τ]/Φ(r)`.
    pub censored_mean_ratio: f64,
}

/// Simulates exits from `B(0, r)` up to `λ_max Φ(r)`.
///
/// The path is observed on a grid of `dt = λ_min Φ(r)/50` and after every big
/// jump; excursions of the Brownian part between grid points are missed, which
/// biases the probabilities slightly downwards.
pub fn exit_time_probability(
    model: &LevyModel,
    kernel: &FreezeKernel,
    r: f64,
    lambdas: &[f64],
    cutoff_factor: f64,
    paths: usize,
    seed: u64,
) -> Result<ExitReport> {
    let bounds = model.bounds();
    let horizon = bounds.horizon();
    if !(r > 0.0 && r <= bounds.phi_inv(horizon)) {
        return Err(Error::domain("exit_time_probability", format!("radius {r} must lie in (0, Φ⁻¹(T)]")));
    }
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) || lambdas[0] <= 0.0 {
        return Err(Error::domain("exit_time_probability", "λ values must be positive and increasing"));
    }
    let phi_r = bounds.phi_big(r)?;
    let dt = lambdas[0] * phi_r / EXIT_STEPS;
    let s_max = lambdas[lambdas.len() - 1] * phi_r;
    let cfg = SamplerConfig::new(model, kernel, cutoff_factor * r, paths, seed)?;
    let sd = (cfg.sigma2 * dt).sqrt();
    let steps = (s_max / dt).ceil() as usize;
    let blocks = paths.div_ceil(BLOCK);
    let exits: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = cfg.block_rng(b);
            let count = BLOCK.min(paths - b * BLOCK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut x = 0.0f64;
                let mut next_jump: f64 = rng.sample::<f64, _>(Exp1) / cfg.rate;
                let mut exit = f64::INFINITY;
                'path: for k in 1..=steps {
                    let end = k as f64 * dt;
                    while next_jump < end {
                        x += cfg.tail.sample(&mut rng);
                        if x.abs() >= r {
                            exit = next_jump;
                            break 'path;
                        }
                        next_jump += rng.sample::<f64, _>(Exp1) / cfg.rate;
                    }
                    let g: f64 = rng.sample(StandardNormal);
                    x += sd * g;
                    if x.abs() >= r {
                        exit = end;
                        break;
                    }
                }
                out.push(exit);
            }
            out
        })
        .collect();
    let exits = exits.concat();
    let mut probability = Vec::new();
    let mut wilson_lo = Vec::new();
    let mut wilson_hi = Vec::new();
    for &lam in lambdas {
        let k = exits.iter().filter(|&&e| e <= lam * phi_r).count();
        let (lo, hi) = wilson_interval(k, paths, 0.95);
        probability.push(k as f64 / paths as f64);
        wilson_lo.push(lo);
        wilson_hi.push(hi);
    }
    let censored_mean_ratio = exits.iter().map(|&e| e.min(s_max)).sum::<f64>() / paths as f64 / phi_r;
    Ok(ExitReport {
        r,
        phi_r,
        dt,
        eps_j: cfg.eps_j,
        paths,
        lambdas: lambdas.to_vec(),
        probability,
        wilson_lo,
        wilson_hi,
        censored_mean_ratio,
    })
}

/// `∫_{|z|≥ε} z² 𝔎J dz`, the variance carried by the compound Poisson part.
pub fn tail_second_moment(kernel: &FreezeKernel, jump: &dyn JumpKernel, eps: f64) -> Result<f64> {
    Ok(2.0 * radial_integral(|r| r * r * kernel.eval(r) * jump.j(r), eps, jump.cutoff_radius() * 4.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{moment, ModelSpec};
    use crate::symmetric_heat_kernel::SymmetricKernel;

    fn model() -> LevyModel {
        LevyModel::new(ModelSpec::default()).unwrap()
    }

    fn mean_and_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn variance_split_reproduces_second_moment() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let cfg = SamplerConfig::new(&m, &k, 0.01, 10, 1).unwrap();
        let total = moment(&k, m.jump().as_ref(), 2).unwrap();
        let split = cfg.sigma2 + tail_second_moment(&k, m.jump().as_ref(), 0.01).unwrap();
        assert!((split - total).abs() < 1e-9 * total, "{split} vs {total}");
        // e^{-bε^β} ≤ σ²(ε) / (2ε^{2-α}/(2-α)) ≤ 1 and λ(ε) ≤ 2ε^{-α}/α
        let ratio = cfg.sigma2 / (2.0 * 0.01f64.powf(0.8) / 0.8);
        assert!(ratio <= 1.0 && ratio >= (-0.1f64).exp(), "{ratio}");
        assert!(cfg.rate <= 2.0 * 0.01f64.powf(-1.2) / 1.2);
    }

    #[test]
    fn increments_have_the_right_moments_and_characteristic_function() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let t = 0.05;
        let eps = 0.01 * m.bounds().phi_inv(t);
        let cfg = SamplerConfig::new(&m, &k, eps, 1_000_000, 7).unwrap();
        let x = cfg.sample_increments(t);
        let (mean, se) = mean_and_se(&x);
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let (var, se_var) = mean_and_se(&sq);
        let expected = t * moment(&k, m.jump().as_ref(), 2).unwrap();
        assert!((var - expected).abs() < 3.0 * se_var, "{var} vs {expected} ± {se_var}");
        let c: Vec<f64> = x.iter().map(|v| v.cos()).collect();
        let (cf, se_cf) = mean_and_se(&c);
        let exact = (-t * m.psi_eval(1.0, &k).unwrap()).exp();
        assert!((cf - exact).abs() < 3.0 * se_cf, "{cf} vs {exact} ± {se_cf}");
    }

    #[test]
    fn halving_time_halves_variance() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let cfg = SamplerConfig::new(&m, &k, 0.005, 400_000, 11).unwrap();
        let a: Vec<f64> = cfg.sample_increments(0.1).iter().map(|v| v * v).collect();
        let b: Vec<f64> = cfg.sample_increments(0.05).iter().map(|v| v * v).collect();
        let (va, sa) = mean_and_se(&a);
        let (vb, sb) = mean_and_se(&b);
        let diff = va - 2.0 * vb;
        assert!(diff.abs() < 3.0 * (sa * sa + 4.0 * sb * sb).sqrt(), "{va} vs 2·{vb}");
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let a = SamplerConfig::new(&m, &k, 0.01, 9000, 3).unwrap().sample_increments(0.1);
        let b = SamplerConfig::new(&m, &k, 0.01, 9000, 3).unwrap().sample_increments(0.1);
        let c = SamplerConfig::new(&m, &k, 0.01, 9000, 4).unwrap().sample_increments(0.1);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a != c);
    }

    #[test]
    fn kde_agrees_with_fourier_inversion() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let t = 0.1;
        let scale = m.bounds().phi_inv(t);
        let cfg = SamplerConfig::new(&m, &k, 0.01 * scale, 200_000, 5).unwrap();
        let x = cfg.sample_increments(t);
        let xs: Vec<f64> = (0..20).map(|i| -2.5 * scale + 5.0 * scale * i as f64 / 19.0).collect();
        let kde = kde_density(&x, &xs).unwrap();
        let sym = SymmetricKernel::new(&m, k.clone()).unwrap();
        for (i, &xi) in xs.iter().enumerate() {
            let expected = smoothed_density(sym.symbol(), t, kde.bandwidth, xi).unwrap();
            let z = (kde.density[i] - expected) / kde.se[i];
            assert!(z.abs() < 4.0, "x {xi}: {} vs {expected} ({z:.2} SE)", kde.density[i]);
            assert!(!kde.undersampled[i]);
        }
        assert!((kde_mass(&x) - 1.0).abs() < 1e-3);
        let left = kde.density[..10].iter().rev();
        for (l, (r, s)) in left.zip(kde.density[10..].iter().zip(&kde.se[10..])) {
            assert!((l - r).abs() < 4.0 * s * std::f64::consts::SQRT_2);
        }
    }

    #[test]
    fn smoothed_density_tends_to_the_kernel() {
        let m = model();
        let sym = SymmetricKernel::new(&m, FreezeKernel::Constant(1.0)).unwrap();
        for x in [0.0, 0.3, 1.7] {
            let a = smoothed_density(sym.symbol(), 0.2, 1e-6, x).unwrap();
            let b = sym.p(0.2, x).unwrap();
            assert!((a - b).abs() < 1e-8 * b.max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn kde_rejects_small_samples() {
        assert!(kde_density(&[0.0; 10], &[0.0]).is_err());
    }

    #[test]
    fn wilson_interval_examples() {
        let (lo, hi) = wilson_interval(50, 100, 0.95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn exit_probability_is_monotone_and_small_for_small_lambda() {
        let m = model();
        let k = FreezeKernel::Constant(1.0);
        let rep = exit_time_probability(&m, &k, 0.3, &[0.01, 0.1, 1.0], 0.01, 20_000, 9).unwrap();
        assert!(rep.probability.windows(2).all(|w| w[1] >= w[0]));
        assert!(rep.wilson_hi[0] < 0.5, "{:?}", rep.probability);
        assert!(rep.censored_mean_ratio > 0.0);
        assert!(exit_time_probability(&m, &k, 100.0, &[0.1], 0.01, 1000, 1).is_err());
    }
}
