//! Jump kernel, coefficient and Fourier-side properties of the model.

use std::f64::consts::PI;

use rand::Rng;
use serde_json::json;

use super::{decade_grid, log_uniform, refined_fit, rng_for, Violation};
use crate::error::Result;
use crate::levy_model::{j2_check, FreezeKernel};
use crate::verify::fit::{Bound, RatioField};
use crate::verify::report::{CheckRecord, Outcome};
use crate::verify::{check, execute, Env, Suite};

pub(super) const CHECKS: &[(&str, &str)] = &[
    ("model.j1", "a⁻¹/(r^dφ(r)) ≤ J(r) ≤ a/(r^dφ(r)) on (0,1] and J(r) ≤ a exp(-br^β) for r > 1"),
    ("model.j2", "r ↦ -J'(r)/r is non-increasing on (0,∞)"),
    ("model.kappa_class", "κ₀ ≤ κ(x,z) ≤ κ₁, κ(x,z) = κ(x,-z) and |κ(x,z) - κ(y,z)| ≤ κ₂|x-y|^δ"),
    ("model.pruitt_psi", "(2/(π²d))𝒫(1/ξ) ≤ ψ(ξ) ≤ 2π²𝒫(1/ξ)"),
    ("model.pruitt_varphi", "𝒫(r) ≍ varphi(r)⁻¹ for r > 0"),
    ("model.psi_varphi", "Ψ(ξ) = sup_{|η| ≤ ξ} ψ(η) ≍ varphi(1/ξ)⁻¹"),
    ("model.varphi_scaling", "varphi(R)/varphi(r) ≤ (R/r)² for 0 < r ≤ R"),
    ("model.varphi_lower", "varphi(r)⁻¹ ≥ r^d J(r)/(d+2) for 0 < r < 1"),
    ("model.varphi_phi", "2 ≤ varphi(r)/Φ(r) ≤ 2e^b for the tempered stable family"),
    ("model.nu1_small", "c⁻¹/(r^{d+2}φ(r)) ≤ ν₁(r) ≤ c/(r^{d+2}φ(r/2)) on (0,1]"),
    ("model.nu1_tail", "ν₁(r) ≤ c r⁻¹ exp(-br^β) for r > 1"),
    ("model.nu1_sandwich", "(r-s)ν₁(r) ≤ J(s)/(2πs) and (r-s)ν₁(s) ≥ (J(s) - J(r))/(2πr) for 0 < s < r"),
    ("model.psi_additivity", "ψ_{𝔎₁+𝔎₂} = ψ_{𝔎₁} + ψ_{𝔎₂}"),
    ("model.psi_frozen_lower", "ψ_{𝔎_y}(ξ) ≥ c Φ(1/ξ)⁻¹ uniformly in the anchor y"),
];

/// Closed-form comparisons, up to floating point rounding.
const EXACT_TOLERANCE: f64 = 1e-10;
/// Monotonicity of `-J'(r)/r` on the grid.
const J2_TOLERANCE: f64 = 1e-12;
/// Comparisons involving one or more quadratures.
const QUADRATURE_TOLERANCE: f64 = 1e-8;

pub(super) fn run(env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    let model = env.model;
    let spec = model.spec();
    let bf = model.bounds();
    let cfg = &env.config.model;
    let n = cfg.samples;
    let per_decade = cfg.grid_per_decade;
    let seed = env.config.seed;
    let profile = env.profile.name.as_str();
    let kappa = &env.config.kappa;
    let (a, b, beta, d) = (spec.a(), spec.b, spec.beta, spec.d as i32);
    let unit = FreezeKernel::Constant(1.0);
    let xi_grid = |n: usize| decade_grid(1e-3, 1e4, n);

    let checks = vec![
        check("model.j1", || {
            let mut rng = rng_for(seed, "model.j1", profile);
            let mut v = Violation::new();
            for k in 0..n {
                if k % 2 == 0 {
                    let r = log_uniform(&mut rng, 1e-8, 1.0);
                    let scaled = model.j_eval(r) * r.powi(d) * bf.phi(r)?;
                    v.update(1.0 / a, scaled, &[r]);
                    v.update(scaled, a, &[r]);
                } else {
                    let r = log_uniform(&mut rng, 1.0, 1e3);
                    v.update(model.j_eval(r), a * (-b * r.powf(beta)).exp(), &[r]);
                }
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["r"]))
        }),
        check("model.j2", || {
            let report = j2_check(model.jump().as_ref());
            Ok(Outcome::at_most(report.max_violation, J2_TOLERANCE)
                .detail(json!({ "location": report.location }))
                .grid(json!({ "r": [1e-4, 50.0], "points": report.points })))
        }),
        check("model.kappa_class", || {
            let mut rng = rng_for(seed, "model.kappa_class", profile);
            let (k0, k1) = kappa.ellipticity();
            let (k2, delta) = kappa.holder();
            let mut v = Violation::new();
            for _ in 0..n {
                let (x, y, z): (f64, f64, f64) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
                let kx = kappa.eval(x, z);
                v.update(k0, kx, &[x, y, z]);
                v.update(kx, k1, &[x, y, z]);
                v.update((kx - kappa.eval(x, -z)).abs(), 0.0, &[x, y, z]);
                v.update((kx - kappa.eval(y, z)).abs(), k2 * (x - y).abs().powf(delta) + f64::EPSILON * k1, &[x, y, z]);
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["x", "y", "z"]).detail(json!({ "kappa0": k0, "kappa1": k1, "kappa2": k2, "delta": delta })))
        }),
        check("model.pruitt_psi", || {
            let mut v = Violation::new();
            let c = 2.0 / (PI * PI * d as f64);
            for xi in xi_grid(per_decade) {
                let psi = model.psi_eval(xi, &unit)?;
                let p = model.pruitt_eval(1.0 / xi)?;
                v.update(c * p, psi, &[xi]);
                v.update(psi, 2.0 * PI * PI * p, &[xi]);
            }
            Ok(v.outcome(QUADRATURE_TOLERANCE, &["xi"]))
        }),
        check("model.pruitt_varphi", || {
            refined_fit(Bound::TwoSided, per_decade, |n| {
                let mut field = RatioField::new(&["r"], Bound::TwoSided);
                for r in decade_grid(1e-4, 1e2, n) {
                    field.push(&[r], model.pruitt_eval(r)? * model.varphi_eval(r)?);
                }
                Ok(field)
            })
            .map(|o| o.grid(json!({ "r": [1e-4, 1e2], "per_decade": per_decade })))
        }),
        check("model.psi_varphi", || {
            refined_fit(Bound::TwoSided, per_decade, |n| {
                let mut field = RatioField::new(&["xi"], Bound::TwoSided);
                let mut running = 0.0f64;
                for xi in xi_grid(n) {
                    running = running.max(model.psi_eval(xi, &unit)?);
                    field.push(&[xi], running * model.varphi_eval(1.0 / xi)?);
                }
                Ok(field)
            })
            .map(|o| o.grid(json!({ "xi": [1e-3, 1e4], "per_decade": per_decade })))
        }),
        check("model.varphi_scaling", || {
            let mut rng = rng_for(seed, "model.varphi_scaling", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (x, y) = (log_uniform(&mut rng, 1e-6, 1e2), log_uniform(&mut rng, 1e-6, 1e2));
                let (r, big) = (x.min(y), x.max(y));
                v.update(model.varphi_eval(big)? / model.varphi_eval(r)?, (big / r).powi(2), &[r, big]);
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["r", "R"]))
        }),
        check("model.varphi_lower", || {
            let mut rng = rng_for(seed, "model.varphi_lower", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let r = log_uniform(&mut rng, 1e-8, 1.0);
                v.update(r.powi(d) * model.j_eval(r) / (d as f64 + 2.0), 1.0 / model.varphi_eval(r)?, &[r]);
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["r"]))
        }),
        check("model.varphi_phi", || {
            let mut rng = rng_for(seed, "model.varphi_phi", profile);
            let mut v = Violation::new();
            let (lo, hi) = (2.0, 2.0 * b.exp());
            for _ in 0..n {
                let r = log_uniform(&mut rng, 1e-8, 1e2);
                let ratio = model.varphi_eval(r)? / bf.phi_big(r)?;
                v.update(lo, ratio, &[r]);
                v.update(ratio, hi, &[r]);
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["r"]).detail(json!({ "lower": lo, "upper": hi })))
        }),
        check("model.nu1_small", || {
            refined_fit(Bound::TwoSided, per_decade, |n| {
                let mut field = RatioField::new(&["r"], Bound::TwoSided);
                for r in decade_grid(1e-6, 1.0, n) {
                    field.push(&[r], model.nu1_eval(r)? * r.powi(d + 2) * bf.phi(r)?);
                }
                Ok(field)
            })
            .map(|o| o.grid(json!({ "r": [1e-6, 1.0], "per_decade": per_decade })))
        }),
        check("model.nu1_tail", || {
            refined_fit(Bound::Upper, per_decade, |n| {
                let mut field = RatioField::new(&["r"], Bound::Upper);
                for r in decade_grid(1.0, 1e2, n) {
                    field.push(&[r], model.nu1_eval(r)? * r * (b * r.powf(beta)).exp());
                }
                Ok(field)
            })
            .map(|o| o.grid(json!({ "r": [1.0, 1e2], "per_decade": per_decade })))
        }),
        check("model.nu1_sandwich", || {
            let mut rng = rng_for(seed, "model.nu1_sandwich", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (x, y) = (log_uniform(&mut rng, 1e-4, 50.0), log_uniform(&mut rng, 1e-4, 50.0));
                let (s, r) = (x.min(y), x.max(y));
                if s == r {
                    continue;
                }
                let (js, jr) = (model.j_eval(s), model.j_eval(r));
                v.update((r - s) * model.nu1_eval(r)?, js / (2.0 * PI * s), &[s, r]);
                v.update((js - jr) / (2.0 * PI * r), (r - s) * model.nu1_eval(s)?, &[s, r]);
            }
            Ok(v.outcome(EXACT_TOLERANCE, &["s", "r"]))
        }),
        check("model.psi_additivity", || {
            let k1 = FreezeKernel::Gaussian { base: 0.0, amplitude: 0.7, width: 0.5 };
            let k2 = FreezeKernel::Constant(0.4);
            let sum = FreezeKernel::Gaussian { base: 0.4, amplitude: 0.7, width: 0.5 };
            let mut worst = 0.0f64;
            let mut at = 0.0;
            for xi in xi_grid(per_decade / 2) {
                let lhs = model.psi_eval(xi, &sum)?;
                let rhs = model.psi_eval(xi, &k1)? + model.psi_eval(xi, &k2)?;
                let err = (lhs - rhs).abs() / rhs;
                if !(err <= worst) {
                    worst = err;
                    at = xi;
                }
            }
            Ok(Outcome::at_most(worst, QUADRATURE_TOLERANCE).detail(json!({ "xi": at })))
        }),
        check("model.psi_frozen_lower", || {
            let anchors = [0.0, 0.5 * PI, PI];
            let symbols = anchors.iter().map(|&y| model.symbol(&kappa.freeze(y))).collect::<Result<Vec<_>>>()?;
            refined_fit(Bound::Lower, per_decade, |n| {
                let mut field = RatioField::new(&["y", "xi"], Bound::Lower);
                for (&y, symbol) in anchors.iter().zip(&symbols) {
                    for xi in xi_grid(n) {
                        field.push(&[y, xi], symbol.eval(xi) * bf.phi_big_fast(1.0 / xi));
                    }
                }
                Ok(field)
            })
            .map(|o| o.grid(json!({ "y": anchors, "xi": [1e-3, 1e4], "per_decade": per_decade })))
        }),
    ];
    Ok(execute(Suite::Model, env.profile, manifest, checks))
}
