//! Scaling inequalities of Φ, Φ⁻¹ and the 𝒢 family, and the convolution
//! bounds built on them.

use rand::Rng;
use serde_json::json;
use statrs::function::gamma::gamma;

use super::{decade_grid, log_uniform, refined_fit, rng_for, Violation};
use crate::error::Result;
use crate::quad::{adaptive_gk_breaks, geometric_breaks, tanh_sinh};
use crate::scale_functions::{beta_fn, BoundFunctions};
use crate::verify::fit::{fit_constant, Bound, RatioField};
use crate::verify::report::{CheckRecord, Outcome, Table};
use crate::verify::{check, execute, Env, Suite};

pub(super) const CHECKS: &[(&str, &str)] = &[
    ("scale.wsc_phi", "weak scaling of Φ: a₁(R/r)^α₁ ≤ Φ(R)/Φ(r) ≤ (R/r)² for 0 < r ≤ R"),
    ("scale.phi_big_below_phi", "Φ(r) ≤ φ(r) for 0 < r ≤ 1"),
    ("scale.wsc_inv", "weak scaling of Φ⁻¹: (R/r)^{1/2} ≤ Φ⁻¹(R)/Φ⁻¹(r) ≤ a₁^{-1/α₁}(R/r)^{1/α₁} for 0 < r ≤ R"),
    ("scale.power_sum", "t^β + s^β ≥ (t+s)^β + (2-2^β)(t^β ∧ s^β) for 0 < β < 1"),
    ("scale.gamma_monotone", "𝒢_{γ₁}^δ ≤ Φ⁻¹(T)^{γ₁-γ₂} 𝒢_{γ₂}^δ on (0,T] for γ₂ ≤ γ₁"),
    ("scale.delta_monotone", "𝒢_γ^{δ₁} ≤ 𝒢_γ^{δ₂} for 0 ≤ δ₂ ≤ δ₁"),
    ("scale.mixed_weights", "𝒢_0^δ + 𝒢_δ^0 ≤ (Φ⁻¹(T)^δ + 1)𝒢 ≤ 2Φ⁻¹(T)^δ 𝒢 on (0,T]"),
    (
        "scale.time_convolution",
        "∫₀^t s^{-η}Φ⁻¹(s)^γ (t-s)^{-θ}Φ⁻¹(t-s)^δ ds ≤ B(δ/2+1-θ, γ/2+1-η) t^{1-η-θ} Φ⁻¹(t)^{γ+δ}",
    ),
    (
        "scale.stretched_exp_convolution",
        "∫ exp(-b|x-z|^β - b|z|^β) dz ≤ c₁ exp(-b|x|^β) with c₁ = 2∫ exp(-b(2-2^β)|z|^β) dz",
    ),
    (
        "scale.power_tail_convolution",
        "∫ (|x-z|^{-2} ∧ 1)(|z|^{-2} ∧ 1) dz ≤ c₂|x|^{-2} for |x| ≥ 1 with c₂ = 2²·2∫(|z|^{-2} ∧ 1) dz",
    ),
    ("scale.g_vs_g_horizon", "𝒢 ≍ 𝒢_T on (0,T] × ℝ"),
    ("scale.g_vs_g_tilde", "𝒢 ≤ c 𝒢̃ on (0,T] × ℝ"),
    ("scale.g_time_scaling", "𝒢(εt, x) ≤ c 𝒢(t, x) on (0,T] × ℝ for ε ∈ {1/2, 1/10}"),
    ("scale.g_shift", "𝒢_T(t, r) ≤ c exp(bΦ⁻¹(t)^β) 𝒢_T(t, r + Φ⁻¹(t))"),
    ("scale.g_space_integral", "∫ 𝒢̃_γ^δ(t, x) dx ≤ c t^{-1} Φ⁻¹(t)^{γ+δ}"),
    ("scale.g_convolution", "∫ 𝒢(t-s, x-z) 𝒢(s, z) dz ≤ c (s^{-1} + (t-s)^{-1}) 𝒢(t, x)"),
];

/// Checks that only apply to a stretched-exponential tail (β < 1).
pub(super) const TEMPERED_ONLY: &[&str] = &["scale.stretched_exp_convolution"];

/// Panel boundaries for a line integral whose integrand has kinks or cusps
/// at `cusps`: geometric grading into every cusp and geometric tails of
/// length `reach` on both sides.
fn graded_breaks(cusps: &[f64], reach: f64) -> Vec<f64> {
    const FIRST: f64 = 1e-9;
    let mut pts = cusps.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let mut out = Vec::new();
    let (lo, hi) = (pts[0], *pts.last().expect("non-empty"));
    out.extend(geometric_breaks(FIRST, reach, 2.0).into_iter().map(|g| lo - g));
    out.extend(geometric_breaks(FIRST, reach, 2.0).into_iter().map(|g| hi + g));
    for w in pts.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        if half > FIRST {
            for g in geometric_breaks(FIRST, half, 2.0) {
                out.push(w[0] + g);
                out.push(w[1] - g);
            }
        }
    }
    out.extend(pts);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn line_integral(f: impl Fn(f64) -> f64, cusps: &[f64], reach: f64, rel_tol: f64, context: &str) -> Result<f64> {
    adaptive_gk_breaks(f, &graded_breaks(cusps, reach), 0.0, rel_tol, context)
}

/// `∫₀^t s^{-η}Φ⁻¹(s)^γ (t-s)^{-θ}Φ⁻¹(t-s)^δ ds`, split where `s` or `t - s`
/// crosses `Φ(1)` so that every piece is smooth inside.
fn time_convolution(bf: &BoundFunctions, g: f64, d: f64, eta: f64, theta: f64, t: f64) -> Result<f64> {
    let kink = bf.phi_one();
    let mut pts = vec![0.0, t];
    pts.extend([kink, t - kink].into_iter().filter(|&p| p > 0.0 && p < t));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += tanh_sinh(
            |x, da, db| {
                let s = if a == 0.0 { da } else { x };
                let u = if b == t { db } else { t - x };
                if s <= 0.0 || u <= 0.0 {
                    return 0.0;
                }
                s.powf(-eta) * bf.phi_inv_fast(s).powf(g) * u.powf(-theta) * bf.phi_inv_fast(u).powf(d)
            },
            a,
            b,
            1e-11,
            "time convolution",
        )?;
    }
    Ok(total)
}

/// `c₁ = 2∫_ℝ exp(-b(2-2^β)|z|^β) dz = 4Γ(1+1/β)(b(2-2^β))^{-1/β}`.
pub(crate) fn stretched_exp_constant(b: f64, beta: f64) -> f64 {
    4.0 * gamma(1.0 + 1.0 / beta) * (b * (2.0 - 2f64.powf(beta))).powf(-1.0 / beta)
}

/// `c₂ = 2^{d+1}·2∫(|z|^{-d-1} ∧ 1)dz` in d = 1, where the integral equals 4.
pub(crate) const POWER_TAIL_CONSTANT: f64 = 4.0 * 2.0 * 4.0;

/// Geometric `t` grid on `[1e-4, T]` and `r` grid on `[1e-3, 50]` plus `r = 0`
/// and the branch points of 𝒢, 𝒢_T, both at the given density.
fn envelope_grid(bf: &BoundFunctions, per_decade: usize) -> (Vec<f64>, Vec<f64>) {
    let times = decade_grid(1e-4, bf.horizon(), per_decade);
    let rt = bf.phi_inv_fast(bf.horizon());
    let mut radii = vec![0.0, 1.0, 1.0 + 1e-12, rt, rt * (1.0 + 1e-12)];
    radii.extend(decade_grid(1e-3, 50.0, per_decade));
    radii.sort_by(f64::total_cmp);
    (times, radii)
}

/// The ratio `f(t, r)` on the envelope grid at full and half density.
fn envelope_fit(bf: &BoundFunctions, per_decade: usize, bound: Bound, f: impl Fn(f64, f64) -> Result<f64>) -> Result<Outcome> {
    let outcome = refined_fit(bound, per_decade, |n| {
        let (times, radii) = envelope_grid(bf, n);
        let mut field = RatioField::new(&["t", "r"], bound);
        for &t in &times {
            for &r in &radii {
                field.push(&[t, r], f(t, r)?);
            }
        }
        Ok(field)
    })?;
    Ok(outcome.grid(json!({ "t": [1e-4, bf.horizon()], "r": [0.0, 50.0], "per_decade": per_decade })))
}

pub(super) fn run(env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    let bf = env.model.bounds();
    let cfg = &env.config.scale;
    let n = cfg.samples;
    let tol = cfg.tolerance;
    let seed = env.config.seed;
    let profile = env.profile.name.as_str();
    let (a1, alpha1) = bf.lower_scaling();
    let horizon = bf.horizon();
    let rt = bf.phi_inv_fast(horizon);
    let b = bf.b();
    let beta = bf.beta();
    let budget = cfg.quadrature_budget;
    let per_decade = cfg.grid_per_decade;

    let mut checks = vec![
        check("scale.wsc_phi", || {
            let mut rng = rng_for(seed, "scale.wsc_phi", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (x, y) = (log_uniform(&mut rng, 1e-6, 1e2), log_uniform(&mut rng, 1e-6, 1e2));
                let (r, big) = (x.min(y), x.max(y));
                let ratio = bf.phi_big(big)? / bf.phi_big(r)?;
                v.update(a1 * (big / r).powf(alpha1), ratio, &[r, big]);
                v.update(ratio, (big / r).powi(2), &[r, big]);
            }
            Ok(v.outcome(tol, &["r", "R"]))
        }),
        check("scale.phi_big_below_phi", || {
            let mut rng = rng_for(seed, "scale.phi_big_below_phi", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let r = log_uniform(&mut rng, 1e-8, 1.0);
                v.update(bf.phi_big(r)?, bf.phi(r)?, &[r]);
            }
            Ok(v.outcome(tol, &["r"]))
        }),
        check("scale.wsc_inv", || {
            let mut rng = rng_for(seed, "scale.wsc_inv", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (x, y) = (log_uniform(&mut rng, 1e-8, 10.0), log_uniform(&mut rng, 1e-8, 10.0));
                let (r, big) = (x.min(y), x.max(y));
                let ratio = bf.phi_inv(big) / bf.phi_inv(r);
                v.update((big / r).sqrt(), ratio, &[r, big]);
                v.update(ratio, a1.powf(-1.0 / alpha1) * (big / r).powf(1.0 / alpha1), &[r, big]);
            }
            Ok(v.outcome(tol, &["r", "R"]))
        }),
        check("scale.power_sum", || {
            let mut rng = rng_for(seed, "scale.power_sum", profile);
            let mut v = Violation::new();
            for k in 0..n {
                let be = if k % 2 == 0 && beta < 1.0 { beta } else { rng.random_range(0.01..0.99) };
                let (t, s) = (log_uniform(&mut rng, 1e-6, 1e3), log_uniform(&mut rng, 1e-6, 1e3));
                let lhs = (t + s).powf(be) + (2.0 - 2f64.powf(be)) * t.powf(be).min(s.powf(be));
                v.update(lhs, t.powf(be) + s.powf(be), &[be, t, s]);
            }
            Ok(v.outcome(tol, &["beta", "t", "s"]))
        }),
        check("scale.gamma_monotone", || {
            let mut rng = rng_for(seed, "scale.gamma_monotone", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (g1, g2) = {
                    let (p, q): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    (p.max(q), p.min(q))
                };
                let d = rng.random_range(0.0..2.0);
                let t = log_uniform(&mut rng, 1e-6, horizon);
                let r = log_uniform(&mut rng, 1e-4, 50.0);
                let lhs = bf.g_gamma_delta(g1, d, t, r);
                let rhs = rt.powf(g1 - g2) * bf.g_gamma_delta(g2, d, t, r);
                v.update(lhs, rhs, &[g1, g2, d, t, r]);
            }
            Ok(v.outcome(tol, &["gamma1", "gamma2", "delta", "t", "r"]))
        }),
        check("scale.delta_monotone", || {
            let mut rng = rng_for(seed, "scale.delta_monotone", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let (d1, d2) = {
                    let (p, q): (f64, f64) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
                    (p.max(q), p.min(q))
                };
                let g = rng.random_range(-2.0..2.0);
                let t = log_uniform(&mut rng, 1e-6, horizon);
                let r = log_uniform(&mut rng, 1e-4, 50.0);
                v.update(bf.g_gamma_delta(g, d1, t, r), bf.g_gamma_delta(g, d2, t, r), &[g, d1, d2, t, r]);
            }
            Ok(v.outcome(tol, &["gamma", "delta1", "delta2", "t", "r"]))
        }),
        check("scale.mixed_weights", || {
            let mut rng = rng_for(seed, "scale.mixed_weights", profile);
            let mut v = Violation::new();
            for _ in 0..n {
                let d = rng.random_range(0.0..2.0);
                let t = log_uniform(&mut rng, 1e-6, horizon);
                let r = log_uniform(&mut rng, 1e-4, 50.0);
                let lhs = bf.g_gamma_delta(0.0, d, t, r) + bf.g_gamma_delta(d, 0.0, t, r);
                let mid = (rt.powf(d) + 1.0) * bf.g(t, r);
                v.update(lhs, mid, &[d, t, r]);
                v.update(mid, 2.0 * rt.powf(d) * bf.g(t, r), &[d, t, r]);
            }
            Ok(v.outcome(tol, &["delta", "t", "r"]))
        }),
        check("scale.time_convolution", || {
            let mut rng = rng_for(seed, "scale.time_convolution", profile);
            let mut v = Violation::new();
            let mut table = Table::new("", &["gamma", "delta", "eta", "theta", "t", "integral", "bound", "ratio"]);
            for _ in 0..cfg.convolution_configs {
                let (g, d) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
                let (eta, theta) = (rng.random_range(-1.0..0.95), rng.random_range(-1.0..0.95));
                let t = log_uniform(&mut rng, 1e-3, horizon);
                let integral = time_convolution(&bf, g, d, eta, theta, t)?;
                let bound = beta_fn(d / 2.0 + 1.0 - theta, g / 2.0 + 1.0 - eta)? * t.powf(1.0 - eta - theta) * bf.phi_inv_fast(t).powf(g + d);
                v.update(integral, bound, &[g, d, eta, theta, t]);
                table.push(vec![g, d, eta, theta, t, integral, bound, integral / bound]);
            }
            Ok(v.outcome(budget, &["gamma", "delta", "eta", "theta", "t"]).table(table))
        }),
    ];
    if beta < 1.0 {
        checks.push(check("scale.stretched_exp_convolution", move || {
            let mut rng = rng_for(seed, "scale.stretched_exp_convolution", profile);
            let c1 = stretched_exp_constant(b, beta);
            let mut v = Violation::new();
            let mut table = Table::new("", &["x", "integral", "bound", "ratio"]);
            for k in 0..cfg.convolution_configs {
                let x = if k == 0 { 0.0 } else { log_uniform(&mut rng, 1e-3, 20.0) };
                let reach = ((b * x.powf(beta) + 45.0) / (2.0 * b)).powf(1.0 / beta);
                let integral = line_integral(
                    |z| (-b * (x - z).abs().powf(beta) - b * z.abs().powf(beta)).exp(),
                    &[0.0, x],
                    reach,
                    1e-12,
                    "stretched exponential convolution",
                )?;
                let bound = c1 * (-b * x.powf(beta)).exp();
                v.update(integral, bound, &[x]);
                table.push(vec![x, integral, bound, integral / bound]);
            }
            Ok(v.outcome(budget, &["x"]).table(table).detail(json!({ "c1": c1 })))
        }));
    }
    checks.extend([
        check("scale.power_tail_convolution", || {
            let mut rng = rng_for(seed, "scale.power_tail_convolution", profile);
            let mut v = Violation::new();
            let mut table = Table::new("", &["x", "integral", "bound", "ratio"]);
            let w = |z: f64| z.abs().powi(-2).min(1.0);
            for k in 0..cfg.convolution_configs {
                let x = if k == 0 { 1.0 } else { log_uniform(&mut rng, 1.0, 100.0) };
                let integral = line_integral(|z| w(x - z) * w(z), &[-1.0, 0.0, 1.0, x - 1.0, x, x + 1.0], 1e6, 1e-12, "power tail convolution")?;
                let bound = POWER_TAIL_CONSTANT * x.powi(-2);
                v.update(integral, bound, &[x]);
                table.push(vec![x, integral, bound, integral / bound]);
            }
            Ok(v.outcome(budget, &["x"]).table(table).detail(json!({ "c2": POWER_TAIL_CONSTANT })))
        }),
        check("scale.g_vs_g_horizon", || envelope_fit(&bf, per_decade, Bound::TwoSided, |t, r| Ok(bf.g(t, r) / bf.g_t(t, r)?))),
        check("scale.g_vs_g_tilde", || envelope_fit(&bf, per_decade, Bound::Upper, |t, r| Ok(bf.g(t, r) / bf.g_tilde(t, r)))),
        check("scale.g_time_scaling", || {
            envelope_fit(&bf, per_decade, Bound::Upper, |t, r| Ok((bf.g(0.5 * t, r) / bf.g(t, r)).max(bf.g(0.1 * t, r) / bf.g(t, r))))
        }),
        check("scale.g_shift", || {
            envelope_fit(&bf, per_decade, Bound::Upper, |t, r| {
                let s = bf.phi_inv_fast(t);
                Ok(bf.g_t(t, r)? / ((b * s.powf(beta)).exp() * bf.g_t(t, r + s)?))
            })
        }),
        check("scale.g_space_integral", || {
            let pairs = [(0.0, 0.0), (0.5, 0.5), (-0.5, 1.0)];
            let outcome = refined_fit(Bound::Upper, per_decade, |n| {
                let mut field = RatioField::new(&["t", "gamma", "delta"], Bound::Upper);
                for t in decade_grid(1e-4, horizon, n) {
                    let s = bf.phi_inv_fast(t);
                    for &(g, d) in &pairs {
                        let half = adaptive_gk_breaks(
                            |r| bf.g_tilde_gamma_delta(g, d, t, r),
                            &[&[0.0][..], &geometric_breaks(s.min(0.5) * 1e-6, 1e6, 2.0)].concat(),
                            0.0,
                            1e-10,
                            "space integral of the weighted bound function",
                        )?;
                        field.push(&[t, g, d], 2.0 * half * t * s.powf(-(g + d)));
                    }
                }
                Ok(field)
            })?;
            Ok(outcome.grid(json!({ "t": [1e-4, horizon], "per_decade": per_decade, "gamma_delta": pairs })))
        }),
        check("scale.g_convolution", || {
            let mut field = RatioField::new(&["t", "s_fraction", "x"], Bound::Upper);
            let tail = (45.0 / b).powf(1.0 / beta).max(225.0 / b);
            let times = [1e-3, 1e-2, 0.1, 0.5, horizon];
            let fractions = [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
            let xs = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
            for &t in &times {
                for &f in &fractions {
                    let s = f * t;
                    let (ps, pu) = (bf.phi_inv_fast(s), bf.phi_inv_fast(t - s));
                    for &x in &xs {
                        let cusps = [0.0, x, ps, -ps, x + pu, x - pu, 1.0, -1.0, x + 1.0, x - 1.0];
                        let integral = line_integral(|z| bf.g(t - s, x - z) * bf.g(s, z), &cusps, tail, 1e-10, "bound function convolution")?;
                        field.push(&[t, f, x], integral / ((1.0 / s + 1.0 / (t - s)) * bf.g(t, x)));
                    }
                }
            }
            let fit = fit_constant(&field)?;
            Ok(Outcome::fitted_upper(fit).grid(json!({ "t": times, "s_fraction": fractions, "x": xs })))
        }),
    ]);
    Ok(execute(Suite::Scale, env.profile, manifest, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk;

    #[test]
    fn stretched_exp_constant_matches_quadrature() {
        for (b, beta) in [(1.0, 0.5), (2.0, 0.3), (0.5, 0.9)] {
            let c = b * (2.0 - 2f64.powf(beta));
            let reach = (60.0 / c).powf(1.0 / beta);
            let half = adaptive_gk_breaks(|z| (-c * z.powf(beta)).exp(), &[&[0.0][..], &geometric_breaks(1e-9, reach, 2.0)].concat(), 0.0, 1e-13, "test").unwrap();
            let oracle = 2.0 * 2.0 * half;
            let closed = stretched_exp_constant(b, beta);
            assert!((oracle - closed).abs() <= 1e-10 * closed, "{oracle} vs {closed}");
        }
    }

    #[test]
    fn power_tail_constant_matches_quadrature() {
        let unit = 2.0 * (1.0 + adaptive_gk(|z| z.powi(-2), 1.0, 1e8, 0.0, 1e-13, "test").unwrap());
        assert!((unit - 4.0).abs() < 1e-6);
        assert_eq!(POWER_TAIL_CONSTANT, 4.0 * 2.0 * unit.round());
    }

    #[test]
    fn graded_line_integral_of_a_two_sided_exponential() {
        // ∫ e^{-|z|-|z-x|} dz = (1 + x) e^{-x}
        for x in [0.0, 0.3, 4.0] {
            let v = line_integral(|z| (-z.abs() - (z - x).abs()).exp(), &[0.0, x], 60.0, 1e-13, "test").unwrap();
            assert!((v - (1.0 + x) * (-x as f64).exp()).abs() < 1e-12, "{x}: {v}");
        }
    }
}
