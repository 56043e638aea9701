//! Correctness and envelope estimates of the symmetric kernels `p` (𝔎 ≡ 1)
//! and `p^𝔎`.

use serde_json::json;

use super::{decade_grid, refined_fit};
use crate::error::Result;
use crate::levy_model::FreezeKernel;
use crate::scale_functions::BoundFunctions;
use crate::symmetric_heat_kernel::{
    convolution_identity_check, dplus2_identity_check, generator_apply, kernel_continuity_in_k, SymmetricKernel,
};
use crate::verify::fit::{Bound, RatioField};
use crate::verify::report::{CheckRecord, Outcome, Table};
use crate::verify::{check, execute, Env, Suite};

pub(super) const CHECKS: &[(&str, &str)] = &[
    ("symkernel.mass", "∫ p^𝔎(t,x) dx = 1"),
    ("symkernel.evenness", "p^𝔎(t,x) = p^𝔎(t,-x)"),
    ("symkernel.nonnegativity", "p^𝔎(t,x) ≥ 0"),
    ("symkernel.unimodality", "r ↦ p^𝔎(t,r) is non-increasing on [0,∞)"),
    ("symkernel.chapman_kolmogorov", "∫ p^𝔎(t,x-y) p^𝔎(s,y) dy = p^𝔎(t+s,x)"),
    ("symkernel.derivatives_fd", "Fourier-multiplier derivatives ∂_x p^𝔎 and ∂_x² p^𝔎 agree with central differences"),
    ("symkernel.generator_time", "∂_t p^𝔎(t,x) = L^𝔎 p^𝔎(t,x)"),
    ("symkernel.generator_cosine", "L^𝔎 cos(x) = -ψ_𝔎(1) cos(x)"),
    ("symkernel.convolution_identity", "p^𝔎(t,x) = ∫ p(κ₀t/2, x-y) p^{𝔎-κ₀/2}(t,y) dy"),
    ("symkernel.dplus2_positivity", "q_t(r) = -(2πr)⁻¹ ∂_r p(t,r) ≥ 0"),
    ("symkernel.dplus2_mass", "q_t is a probability density on ℝ^{d+2}: ∫ q_t(r) 4πr² dr = 1"),
    ("symkernel.dplus2_envelope", "q_t(r) ≤ c t𝒢^{(d+2)}(t,r)"),
    ("symkernel.upper_envelope", "p^𝔎(t,x) ≤ c t𝒢(t,x)"),
    ("symkernel.gradient_envelope_0", "|p(t,x)| ≤ c t𝒢(t,x)"),
    ("symkernel.gradient_envelope_1", "|∇p(t,x)| ≤ c Φ⁻¹(t)⁻¹ t𝒢(t,x)"),
    ("symkernel.gradient_envelope_2", "|∇²p(t,x)| ≤ c Φ⁻¹(t)⁻² t𝒢(t,x)"),
    ("symkernel.second_difference", "|δ_{p^𝔎}(t,x;z)| ≤ c((|z|/Φ⁻¹(t))² ∧ 1) t(𝒢(t,x±z) + 𝒢(t,x))"),
    ("symkernel.abs_delta_integral", "∫ |δ_{p^𝔎}(t,x;z)| J(|z|) dz ≤ c𝒢(t,x)"),
    ("symkernel.holder_pairs", "|p(t,x) - p(t,y)| ≤ c(|x-y|/Φ⁻¹(t) ∧ 1) t(𝒢(t,x) + 𝒢(t,y))"),
    ("symkernel.continuity_in_k", "|p^{𝔎₁} - p^{𝔎₂}|(t,x) ≤ c‖𝔎₁-𝔎₂‖_∞ t𝒢(t,x), linearly in ‖𝔎₁-𝔎₂‖_∞"),
];

const MASS_TOLERANCE: f64 = 1e-6;
const ROUNDING_TOLERANCE: f64 = 1e-10;
const CK_TOLERANCE: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-4;
const GENERATOR_TOLERANCE: f64 = 1e-3;
const EIGENFUNCTION_TOLERANCE: f64 = 1e-6;
const FOURIER_TOLERANCE: f64 = 1e-12;
const DPLUS2_MASS_TOLERANCE: f64 = 1e-3;
/// Admissible deviation of consecutive continuity ratios from one.
const SLOPE_TOLERANCE: f64 = 0.3;

/// Increments `z = w Φ⁻¹(t)` of the second-difference field.
const DELTA_STEPS: [f64; 7] = [0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0];
/// Offsets `y - x = w Φ⁻¹(t)` of the Hölder pairs.
const HOLDER_STEPS: [f64; 8] = [-10.0, -1.0, -0.1, -0.01, 0.01, 0.1, 1.0, 10.0];

/// Non-negative envelope abscissae at refinement `level`: `0`, both sides of
/// the branch point `|x| = 1` of 𝒢, a uniform grid of step `2 x_max / level`
/// and a geometric grid `Φ⁻¹(t)·[1e-2, 10]` with `level/10` points per decade.
/// Halving an even level keeps a subset.
fn x_grid(bf: &BoundFunctions, t: f64, x_max: f64, level: usize) -> Vec<f64> {
    let half = (level / 2).max(1);
    let step = x_max / half as f64;
    let s = bf.phi_inv_fast(t);
    let mut xs: Vec<f64> = (0..=half).map(|j| j as f64 * step).collect();
    xs.extend([1.0, 1.0 + 1e-9].into_iter().filter(|&x| x < x_max));
    xs.extend(decade_grid(1e-2, 10.0, (level / 10).max(1)).into_iter().map(|u| u * s).filter(|&x| x < x_max));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Upper fit of `f(t, x)` over `times × x_grid`, refined in `x`.
fn envelope(
    bf: &BoundFunctions,
    times: &[f64],
    x_max: f64,
    level: usize,
    f: impl Fn(f64, f64) -> Result<f64>,
) -> Result<Outcome> {
    let outcome = refined_fit(Bound::Upper, level, |n| {
        let mut field = RatioField::new(&["t", "x"], Bound::Upper);
        for &t in times {
            for x in x_grid(bf, t, x_max, n) {
                field.push(&[t, x], f(t, x)?);
            }
        }
        Ok(field)
    })?;
    Ok(outcome.grid(json!({ "t": times, "x_max": x_max, "level": level })))
}

pub(super) fn run(env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    let model = env.model;
    let bf = model.bounds();
    let cfg = &env.config.symkernel;
    let times = cfg.times.as_slice();
    let x_max = cfg.x_max;
    let level = cfg.x_points - 1;
    let configured = cfg.kernel.to_kernel();
    let unit = SymmetricKernel::new(model, FreezeKernel::Constant(1.0))?;
    let pk = SymmetricKernel::new(model, configured.clone())?;
    let both = [("unit", &unit), ("configured", &pk)];
    let uniform: Vec<f64> = {
        let n = cfg.x_points - 1;
        (0..=n).map(|j| -x_max + 2.0 * x_max * j as f64 / n as f64).collect()
    };
    let g = |t: f64, x: f64| t * bf.g(t, x);

    let checks = vec![
        check("symkernel.mass", || {
            let mut table = Table::new("", &["kernel", "t", "mass", "deviation", "step", "half_width", "tail_estimate"]);
            let mut worst = 0.0f64;
            for (k, (_, kernel)) in both.iter().enumerate() {
                for &t in times {
                    let m = kernel.mass(t)?;
                    worst = worst.max(m.deviation);
                    table.push(vec![k as f64, t, m.mass, m.deviation, m.step, m.half_width, m.tail_estimate]);
                }
            }
            Ok(Outcome::at_most(worst, MASS_TOLERANCE).table(table).grid(json!({ "t": times, "kernels": ["unit", "configured"] })))
        }),
        check("symkernel.evenness", || {
            let mut worst = 0.0f64;
            for (_, kernel) in &both {
                for &t in times {
                    for &x in &uniform {
                        worst = worst.max((kernel.p(t, x)? - kernel.p(t, -x)?).abs());
                    }
                }
            }
            Ok(Outcome::at_most(worst, ROUNDING_TOLERANCE).grid(json!({ "t": times, "x": [-x_max, x_max], "points": uniform.len() })))
        }),
        check("symkernel.nonnegativity", || {
            let mut lowest = f64::INFINITY;
            for (_, kernel) in &both {
                let field = kernel.field(times, &uniform)?;
                lowest = lowest.min(field.min_value());
            }
            Ok(Outcome::at_least(lowest, -ROUNDING_TOLERANCE).grid(json!({ "t": times, "x": [-x_max, x_max], "points": uniform.len() })))
        }),
        check("symkernel.unimodality", || {
            let mut worst = 0.0f64;
            for (_, kernel) in &both {
                for &t in times {
                    worst = worst.max(kernel.unimodality_violation(t)?);
                }
            }
            Ok(Outcome::at_most(worst, ROUNDING_TOLERANCE).grid(json!({ "t": times })))
        }),
        check("symkernel.chapman_kolmogorov", || {
            let mut table = Table::new("", &["kernel", "t", "s", "sup_error", "x"]);
            let mut worst = 0.0f64;
            for (k, (_, kernel)) in both.iter().enumerate() {
                for &(t, s) in &cfg.chapman_kolmogorov_pairs {
                    let r = kernel.chapman_kolmogorov(t, s)?;
                    worst = worst.max(r.value);
                    table.push(vec![k as f64, t, s, r.value, r.x]);
                }
            }
            Ok(Outcome::at_most(worst, CK_TOLERANCE).table(table).grid(json!({ "pairs": cfg.chapman_kolmogorov_pairs })))
        }),
        check("symkernel.derivatives_fd", || {
            let mut worst = 0.0f64;
            let mut at = json!(null);
            for (name, kernel) in &both {
                for &t in times {
                    let r = kernel.derivative_fd_check(t, &cfg.fd_points)?;
                    if r.value > worst {
                        worst = r.value;
                        at = json!({ "kernel": name, "t": t, "x": r.x });
                    }
                }
            }
            Ok(Outcome::at_most(worst, FD_TOLERANCE).detail(at).grid(json!({ "t": times, "x": cfg.fd_points })))
        }),
        check("symkernel.generator_time", || {
            let mut worst = 0.0f64;
            let mut at = json!(null);
            let mut xs = cfg.fd_points.clone();
            xs.insert(0, 0.0);
            for (name, kernel) in &both {
                for &t in times {
                    let r = kernel.generator_residual(t, &xs)?;
                    if r.value > worst {
                        worst = r.value;
                        at = json!({ "kernel": name, "t": t, "x": r.x });
                    }
                }
            }
            Ok(Outcome::at_most(worst, GENERATOR_TOLERANCE).detail(at).grid(json!({ "t": times, "x": xs })))
        }),
        check("symkernel.generator_cosine", || {
            let mut worst = 0.0f64;
            for (_, kernel) in &both {
                let psi1 = model.psi_eval(1.0, kernel.kernel())?;
                for &x in &cfg.fd_points {
                    let lf = generator_apply(f64::cos, x, kernel.kernel(), model.jump().as_ref(), 0.0, 1.0)?;
                    worst = worst.max((lf + psi1 * x.cos()).abs() / psi1);
                }
            }
            Ok(Outcome::at_most(worst, EIGENFUNCTION_TOLERANCE).grid(json!({ "x": cfg.fd_points })))
        }),
        check("symkernel.convolution_identity", || {
            let mut table = Table::new("", &["t", "sup_error", "x", "fourier_error"]);
            let (mut sup, mut fourier) = (0.0f64, 0.0f64);
            for &t in &cfg.convolution_times {
                let r = convolution_identity_check(model, &configured, cfg.kappa0, t)?;
                sup = sup.max(r.sup_error);
                fourier = fourier.max(r.fourier_error);
                table.push(vec![t, r.sup_error, r.location, r.fourier_error]);
            }
            let value = if fourier <= FOURIER_TOLERANCE { sup } else { f64::INFINITY };
            Ok(Outcome::at_most(value, CK_TOLERANCE)
                .table(table)
                .detail(json!({ "fourier_error": fourier, "fourier_tolerance": FOURIER_TOLERANCE }))
                .grid(json!({ "t": cfg.convolution_times, "kappa0": cfg.kappa0 })))
        }),
        check("symkernel.dplus2_positivity", || {
            let mut lowest = f64::INFINITY;
            for &t in times {
                lowest = lowest.min(dplus2_identity_check(&unit, t)?.min_value);
            }
            Ok(Outcome::at_least(lowest, -ROUNDING_TOLERANCE).grid(json!({ "t": times })))
        }),
        check("symkernel.dplus2_mass", || {
            let mut worst = 0.0f64;
            for &t in times {
                worst = worst.max((dplus2_identity_check(&unit, t)?.mass - 1.0).abs());
            }
            Ok(Outcome::at_most(worst, DPLUS2_MASS_TOLERANCE).grid(json!({ "t": times })))
        }),
        check("symkernel.dplus2_envelope", || {
            let mut worst = 0.0f64;
            for &t in times {
                worst = worst.max(dplus2_identity_check(&unit, t)?.bound_ratio);
            }
            Ok(Outcome::new(worst, crate::verify::Tolerance::Finite).grid(json!({ "t": times })))
        }),
        check("symkernel.upper_envelope", || envelope(bf, times, x_max, level, |t, x| Ok(pk.p(t, x)? / g(t, x)))),
        check("symkernel.gradient_envelope_0", || envelope(bf, times, x_max, level, |t, x| Ok(unit.grad(0, t, x)?.abs() / g(t, x)))),
        check("symkernel.gradient_envelope_1", || {
            envelope(bf, times, x_max, level, |t, x| Ok(unit.grad(1, t, x)?.abs() * bf.phi_inv_fast(t) / g(t, x)))
        }),
        check("symkernel.gradient_envelope_2", || {
            envelope(bf, times, x_max, level, |t, x| Ok(unit.grad(2, t, x)?.abs() * bf.phi_inv_fast(t).powi(2) / g(t, x)))
        }),
        check("symkernel.second_difference", || {
            let outcome = refined_fit(Bound::Upper, level, |n| {
                let mut field = RatioField::new(&["t", "x", "w"], Bound::Upper);
                for &t in times {
                    let s = bf.phi_inv_fast(t);
                    for x in x_grid(bf, t, x_max, n) {
                        for w in DELTA_STEPS {
                            let z = w * s;
                            let weight = (w * w).min(1.0) * (g(t, x + z) + g(t, x - z) + g(t, x));
                            field.push(&[t, x, w], pk.delta(t, x, z)?.abs() / weight);
                        }
                    }
                }
                Ok(field)
            })?;
            Ok(outcome.grid(json!({ "t": times, "x_max": x_max, "level": level, "z_over_scale": DELTA_STEPS })))
        }),
        check("symkernel.abs_delta_integral", || envelope(bf, times, x_max, level, |t, x| Ok(pk.abs_delta_integral(t, x)? / bf.g(t, x)))),
        check("symkernel.holder_pairs", || {
            let outcome = refined_fit(Bound::Upper, level, |n| {
                let mut field = RatioField::new(&["t", "x", "w"], Bound::Upper);
                for &t in times {
                    let s = bf.phi_inv_fast(t);
                    for x in x_grid(bf, t, x_max, n) {
                        for w in HOLDER_STEPS {
                            let y = x + w * s;
                            let diff = (unit.p(t, x)? - unit.p(t, y)?).abs();
                            field.push(&[t, x, w], diff / (w.abs().min(1.0) * (g(t, x) + g(t, y))));
                        }
                    }
                }
                Ok(field)
            })?;
            Ok(outcome.grid(json!({ "t": times, "x_max": x_max, "level": level, "offset_over_scale": HOLDER_STEPS })))
        }),
        check("symkernel.continuity_in_k", || {
            let mut xs = x_grid(bf, 1e-3, x_max, level);
            xs.extend(decade_grid(1e-3, 1.0, (level / 10).max(1)));
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut table = Table::new("", &["h", "value_ratio", "gradient_ratio"]);
            let mut ratios = Vec::new();
            for &h in &cfg.continuity_steps {
                let shifted = SymmetricKernel::new(model, configured.shifted(h))?;
                let r = kernel_continuity_in_k(&pk, &shifted, h, times, &xs)?;
                table.push(vec![h, r.value_ratio, r.gradient_ratio]);
                ratios.push((r.value_ratio, r.gradient_ratio));
            }
            let mut worst = 0.0f64;
            let mut slopes = Vec::new();
            for w in ratios.windows(2) {
                let (v, gr) = (w[1].0 / w[0].0, w[1].1 / w[0].1);
                slopes.push([v, gr]);
                worst = worst.max((v - 1.0).abs()).max((gr - 1.0).abs());
            }
            if ratios.iter().any(|(v, gr)| !v.is_finite() || !gr.is_finite()) {
                worst = f64::INFINITY;
            }
            Ok(Outcome::at_most(worst, SLOPE_TOLERANCE)
                .table(table)
                .detail(json!({ "ratios": ratios, "consecutive_ratio_quotients": slopes }))
                .grid(json!({ "h": cfg.continuity_steps, "t": times, "points": xs.len() })))
        }),
    ];
    Ok(execute(Suite::Symkernel, env.profile, manifest, checks))
}
