//! Monte Carlo cross-checks of the symmetric kernel and the exit-time estimate.

use rand::Rng;
use serde_json::json;

use super::rng_for;
use crate::error::Result;
use crate::levy_model::moment;
use crate::simulator::{exit_time_probability, kde_density, kde_mass, smoothed_density, SamplerConfig};
use crate::symmetric_heat_kernel::SymmetricKernel;
use crate::verify::report::{CheckRecord, Outcome, Table, Tolerance};
use crate::verify::{check, execute, Env, Suite};

pub(super) const CHECKS: &[(&str, &str)] = &[
    ("simulate.increment_mean", "E X_t = 0"),
    ("simulate.increment_variance", "E X_t² = t ∫ z² 𝔎(z)J(|z|) dz"),
    ("simulate.increment_cf", "E cos(ξX_t) = e^{-tψ_𝔎(ξ)} at ξ = 1"),
    ("simulate.self_similarity", "E X_t² = 2 E X_{t/2}²"),
    ("simulate.kde_fourier", "kernel density estimate of X_t agrees with the smoothed density of p^𝔎(t,·)"),
    ("simulate.kde_mass", "the kernel density estimate has unit mass"),
    ("simulate.kde_symmetry", "the kernel density estimate is even"),
    ("simulate.determinism", "identical seed gives bit-identical samples for any worker count"),
    ("simulate.exit_monotone", "λ ↦ P(τ_{B(0,r)} ≤ λΦ(r)) is non-decreasing"),
    ("simulate.exit_lambda", "some λ gives P(τ_{B(0,r)} ≤ λΦ(r)) ≤ 1/2 for every radius r"),
    ("simulate.exit_mean_lower", "E τ_{B(0,r)} ≥ c Φ(r)"),
];

/// Standard errors allowed for moment and characteristic-function checks.
const MOMENT_SE: f64 = 3.0;
/// Standard errors allowed for pointwise density comparisons.
const DENSITY_SE: f64 = 4.0;
const KDE_MASS_TOLERANCE: f64 = 1e-3;
const EXIT_PROBABILITY: f64 = 0.5;
const DETERMINISM_PATHS: usize = 20_000;

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn squares(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}

pub(super) fn run(env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    let model = env.model;
    let bf = model.bounds();
    let spec = &env.config.sampler;
    let kernel = env.config.symkernel.kernel.to_kernel();
    let sym = SymmetricKernel::new(model, kernel.clone())?;
    let profile = env.profile.name.as_str();
    let seed_for = |purpose: &str| rng_for(spec.seed, purpose, profile).random::<u64>();
    let sampler = |t: f64, paths: usize, purpose: &str| {
        SamplerConfig::new(model, &kernel, spec.cutoff_factor * bf.phi_inv_fast(t), paths, seed_for(purpose))
    };
    let kde_times = env.config.symkernel.kde_times.clone();
    let mut samples = Vec::with_capacity(kde_times.len());
    for (k, &t) in kde_times.iter().enumerate() {
        let cfg = sampler(t, spec.paths, &format!("increments/{k}"))?;
        samples.push((t, cfg.eps_j, cfg.sample_increments(t)));
    }
    let (t0, eps0, first) = (samples[0].0, samples[0].1, &samples[0].2);
    let second_moment = moment(&kernel, model.jump().as_ref(), 2)?;
    let kde_grid = |t: f64| {
        let s = bf.phi_inv_fast(t);
        let n = spec.kde_points;
        (0..n).map(|i| -2.5 * s + 5.0 * s * i as f64 / (n - 1) as f64).collect::<Vec<f64>>()
    };
    let exits = spec
        .exit_radii
        .iter()
        .enumerate()
        .map(|(k, &r)| exit_time_probability(model, &kernel, r, &spec.exit_lambdas, spec.cutoff_factor, spec.exit_paths, seed_for(&format!("exit/{k}"))))
        .collect::<Result<Vec<_>>>()?;
    let exit_grid = json!({ "r": spec.exit_radii, "lambda": spec.exit_lambdas, "paths": spec.exit_paths });

    let checks = vec![
        check("simulate.increment_mean", || {
            let (mean, se) = mean_and_se(first);
            Ok(Outcome::at_most(mean.abs() / se, MOMENT_SE)
                .detail(json!({ "mean": mean, "se": se }))
                .grid(json!({ "t": t0, "paths": first.len(), "eps_j": eps0 })))
        }),
        check("simulate.increment_variance", || {
            let (var, se) = mean_and_se(&squares(first));
            let expected = t0 * second_moment;
            Ok(Outcome::at_most((var - expected).abs() / se, MOMENT_SE)
                .detail(json!({ "variance": var, "expected": expected, "se": se }))
                .grid(json!({ "t": t0, "paths": first.len(), "eps_j": eps0 })))
        }),
        check("simulate.increment_cf", || {
            let c: Vec<f64> = first.iter().map(|v| v.cos()).collect();
            let (cf, se) = mean_and_se(&c);
            let exact = (-t0 * model.psi_eval(1.0, &kernel)?).exp();
            Ok(Outcome::at_most((cf - exact).abs() / se, MOMENT_SE)
                .detail(json!({ "empirical": cf, "exact": exact, "se": se }))
                .grid(json!({ "t": t0, "xi": 1.0, "paths": first.len() })))
        }),
        check("simulate.self_similarity", || {
            let half = sampler(t0, spec.paths, "half_time")?.sample_increments(0.5 * t0);
            let (va, sa) = mean_and_se(&squares(first));
            let (vb, sb) = mean_and_se(&squares(&half));
            let z = (va - 2.0 * vb).abs() / (sa * sa + 4.0 * sb * sb).sqrt();
            Ok(Outcome::at_most(z, MOMENT_SE)
                .detail(json!({ "variance_t": va, "variance_half_t": vb }))
                .grid(json!({ "t": [t0, 0.5 * t0], "paths": spec.paths })))
        }),
        check("simulate.kde_fourier", || {
            let mut table = Table::new("", &["t", "x", "kde", "se", "smoothed_density", "z", "undersampled"]);
            let (mut worst, mut at) = (0.0f64, (0.0, 0.0));
            let mut flagged = 0usize;
            for (t, _, x) in &samples {
                let xs = kde_grid(*t);
                let kde = kde_density(x, &xs)?;
                for (i, &xi) in xs.iter().enumerate() {
                    let expected = smoothed_density(sym.symbol(), *t, kde.bandwidth, xi)?;
                    let z = (kde.density[i] - expected).abs() / kde.se[i];
                    let under = kde.undersampled[i];
                    table.push(vec![*t, xi, kde.density[i], kde.se[i], expected, z, under as u8 as f64]);
                    if under {
                        flagged += 1;
                    } else if z > worst {
                        worst = z;
                        at = (*t, xi);
                    }
                }
            }
            Ok(Outcome::at_most(worst, DENSITY_SE)
                .table(table)
                .detail(json!({ "at": { "t": at.0, "x": at.1 }, "undersampled_points": flagged }))
                .grid(json!({ "t": kde_times, "points": spec.kde_points, "paths": spec.paths })))
        }),
        check("simulate.kde_mass", || {
            let worst = samples.iter().map(|(_, _, x)| (kde_mass(x) - 1.0).abs()).fold(0.0, f64::max);
            Ok(Outcome::at_most(worst, KDE_MASS_TOLERANCE).grid(json!({ "t": kde_times, "paths": spec.paths })))
        }),
        check("simulate.kde_symmetry", || {
            let mut worst = 0.0f64;
            for (t, _, x) in &samples {
                let xs = kde_grid(*t);
                let kde = kde_density(x, &xs)?;
                let n = xs.len();
                for i in 0..n / 2 {
                    let j = n - 1 - i;
                    let se = kde.se[i].hypot(kde.se[j]);
                    worst = worst.max((kde.density[i] - kde.density[j]).abs() / se);
                }
            }
            Ok(Outcome::at_most(worst, DENSITY_SE).grid(json!({ "t": kde_times, "points": spec.kde_points })))
        }),
        check("simulate.determinism", || {
            let cfg = sampler(t0, DETERMINISM_PATHS, "determinism")?;
            let reference = cfg.sample_increments(t0);
            let mut mismatches = 0usize;
            for workers in [1, 2, 3] {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| crate::error::Error::param("workers", e.to_string()))?;
                let again = pool.install(|| cfg.sample_increments(t0));
                mismatches += reference.iter().zip(&again).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
                mismatches += reference.len().abs_diff(again.len());
            }
            Ok(Outcome::at_most(mismatches as f64, 0.0).grid(json!({ "t": t0, "paths": DETERMINISM_PATHS, "workers": [1, 2, 3] })))
        }),
        check("simulate.exit_monotone", || {
            let mut table = Table::new("", &["r", "lambda", "probability", "wilson_lo", "wilson_hi"]);
            let mut worst = 0.0f64;
            for e in &exits {
                for k in 0..e.lambdas.len() {
                    table.push(vec![e.r, e.lambdas[k], e.probability[k], e.wilson_lo[k], e.wilson_hi[k]]);
                }
                worst = e.probability.windows(2).map(|w| w[0] - w[1]).fold(worst, f64::max);
            }
            Ok(Outcome::at_most(worst, 0.0).table(table).grid(exit_grid.clone()))
        }),
        check("simulate.exit_lambda", || {
            let lambdas = &spec.exit_lambdas;
            let upper: Vec<f64> = (0..lambdas.len()).map(|k| exits.iter().map(|e| e.wilson_hi[k]).fold(0.0, f64::max)).collect();
            let k = (0..upper.len()).min_by(|&a, &b| upper[a].total_cmp(&upper[b])).expect("λ sweep is non-empty");
            let admissible: Vec<f64> = lambdas.iter().zip(&upper).filter(|(_, &u)| u <= EXIT_PROBABILITY).map(|(&l, _)| l).collect();
            Ok(Outcome::at_most(upper[k], EXIT_PROBABILITY)
                .detail(json!({
                    "lambda": lambdas[k],
                    "admissible_lambdas": admissible,
                    "wilson_upper_by_lambda": upper,
                    "confidence": 0.95,
                    "dt": exits.iter().map(|e| e.dt).collect::<Vec<_>>(),
                    "eps_j": exits.iter().map(|e| e.eps_j).collect::<Vec<_>>(),
                }))
                .grid(exit_grid.clone()))
        }),
        check("simulate.exit_mean_lower", || {
            let mut table = Table::new("", &["r", "phi_r", "censored_mean_ratio"]);
            let mut lowest = f64::INFINITY;
            for e in &exits {
                lowest = lowest.min(e.censored_mean_ratio);
                table.push(vec![e.r, e.phi_r, e.censored_mean_ratio]);
            }
            Ok(Outcome::new(lowest, Tolerance::Positive)
                .table(table)
                .detail(json!({ "censoring_lambda": spec.exit_lambdas.last() }))
                .grid(exit_grid.clone()))
        }),
    ];
    Ok(execute(Suite::Simulate, env.profile, manifest, checks))
}
