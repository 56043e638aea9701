//! The Levi construction of `p^κ` and the estimates of the non-symmetric kernel.

use serde_json::json;

use super::refined_fit;
use crate::error::Result;
use crate::levy_model::{FreezeKernel, KappaSpec};
use crate::parametrix::{LatticeField, Parametrix};
use crate::scale_functions::BoundFunctions;
use crate::symmetric_heat_kernel::SymmetricKernel;
use crate::verify::fit::{fit_constant, Bound, RatioField};
use crate::verify::report::{CheckRecord, Outcome, Table};
use crate::verify::{check, execute, Env, Suite};

pub(super) const CHECKS: &[(&str, &str)] = &[
    ("parametrix.constant_reduction", "κ ≡ c gives p^κ(t,x,y) = p(ct,x-y)"),
    ("parametrix.picard_trace", "‖q_{n+1}‖_w/‖q_n‖_w eventually below 1/2, q = Σ q_n converges"),
    ("parametrix.q0_envelope", "|q₀(t,x,y)| ≤ c𝒢_0^{δ₀}(t,x-y)"),
    ("parametrix.q_envelope", "|q(t,x,y)| ≤ c(𝒢_{δ₀}^0 + 𝒢_0^{δ₀})(t,x-y)"),
    ("parametrix.phi_envelope", "|φ_y(t,x)| ≤ ct(𝒢_0^{δ₀} + 𝒢_{δ₀}^0)(t,x-y)"),
    ("parametrix.mass", "∫ p^κ(t,x,y) dy = 1"),
    ("parametrix.chapman_kolmogorov", "∫ p^κ(t,x,z) p^κ(s,z,y) dz = p^κ(t+s,x,y)"),
    ("parametrix.nonnegativity", "p^κ(t,x,y) ≥ 0"),
    ("parametrix.upper_envelope", "p^κ(t,x,y) ≤ c t𝒢(t,x-y)"),
    ("parametrix.near_diagonal_lower", "p^κ(t,x,y) ≥ c Φ⁻¹(t)^{-d} for |x-y| ≤ Φ⁻¹(t)/2"),
    ("parametrix.off_diagonal_lower", "p^κ(t,x,y) ≥ c tJ(|x-y|) for Φ⁻¹(t) < |x-y|"),
    ("parametrix.pde_residual", "∂_t p^κ(t,x,y) = L^κ p^κ(t,·,y)(x) for x ≠ y"),
    ("parametrix.generator_envelope", "|L^{κ,ε} p^κ(t,·,y)(x)| ≤ c𝒢̃(t,x-y) for ε ∈ [0,1]"),
    ("parametrix.holder", "|p^κ(t,x,y) - p^κ(t,x',y)| ≤ c|x-x'|^γ tΦ⁻¹(t)^γ (𝒢(t,x-y) ∨ 𝒢(t,x'-y))"),
    ("parametrix.holder_scaled", "|p^κ(t,x,y) - p^κ(t,x',y)| ≤ c(|x-x'|/Φ⁻¹(t))^γ t(𝒢(t,x-y) ∨ 𝒢(t,x'-y))"),
    ("parametrix.continuity_t0", "sup_x |P_t^κ f(x) - f(x)| → 0 as t → 0"),
    ("parametrix.generator_limit", "(P_t^κ f - f)/t → L^κ f uniformly as t → 0"),
    ("parametrix.corollary_near", "p^κ(t,x,y) ≍ φ⁻¹(t)^{-d} ∧ t/(|x-y|^d φ(|x-y|)) for |x-y| ≤ 1"),
    ("parametrix.corollary_far", "p^κ(t,x,y) ≥ c t exp(-b|x-y|^β) for |x-y| > 1"),
];

const REDUCTION_TOLERANCE: f64 = 1e-6;
const PICARD_RATIO_LIMIT: f64 = 0.5;
/// Trailing Picard ratios that must lie below the limit.
const PICARD_TAIL: usize = 3;
const MASS_TOLERANCE: f64 = 1e-3;
const CK_TOLERANCE: f64 = 1e-3;
const NEGATIVITY_TOLERANCE: f64 = 1e-8;
const RESIDUAL_TOLERANCE: f64 = 5e-3;
const CONTINUITY_TOLERANCE: f64 = 0.01;
const GENERATOR_LIMIT_TOLERANCE: f64 = 0.05;
/// Lattice shifts `x' - x = k h` of the Hölder pairs.
const HOLDER_SHIFTS: [i64; 6] = [1, 2, 4, 8, 16, 32];
/// Lattice offsets `v` at which `L^{κ,ε}` with `ε > 0` is evaluated.
const GENERATOR_OFFSETS: [i64; 8] = [0, 1, 2, 4, 8, 16, 32, 64];
/// Times of the `p^κ(t, 0, ·)` profiles in the plot data.
const PROFILE_TIMES: [f64; 3] = [0.1, 0.25, 0.5];

/// Visits `(i, v, x, r = |y - x|)` for every node with `|y - x| ≤ reach`.
fn for_each_pair(f: &LatticeField, reach: f64, mut visit: impl FnMut(usize, i64, f64, f64)) {
    let lim = ((reach / f.h) + 1e-9).floor().min(f.half as f64) as i64;
    for i in 0..f.n {
        for v in -lim..=lim {
            visit(i, v, f.x(i), f.offset(v).abs());
        }
    }
}

/// Fit of `ratio(t, r, value)` over `p^κ(t)` at `times` within `reach`, with the
/// coarser construction as the lower refinement level when given.
fn kernel_fit(
    bound: Bound,
    fine: &Parametrix,
    coarse: Option<&Parametrix>,
    times: &[f64],
    reach: impl Fn(f64) -> (f64, f64),
    ratio: impl Fn(f64, f64, f64) -> f64,
) -> Result<Outcome> {
    let field = |p: &Parametrix| -> Result<RatioField> {
        let mut out = RatioField::new(&["t", "x", "r"], bound);
        for &t in times {
            let f = p.p_kappa_field(t)?;
            let (lo, hi) = reach(t);
            for_each_pair(&f, hi, |i, v, x, r| {
                if r >= lo {
                    out.push(&[t, x, r], ratio(t, r, f.get(i, v)));
                }
            });
        }
        Ok(out)
    };
    let outcome = match coarse {
        Some(c) => refined_fit(bound, 2, |level| if level == 2 { field(fine) } else { field(c) })?,
        None => Outcome::fitted(bound, fit_constant(&field(fine)?)?),
    };
    Ok(outcome.grid(json!({
        "t": times,
        "cell_nodes": fine.nodes(),
        "coarse_cell_nodes": coarse.map(|c| c.nodes()),
    })))
}

/// Upper fit of `|field(t)|/weight(t, r)` over `0 < r ≤ reach` at `times`.
fn field_envelope(
    times: &[f64],
    reach: f64,
    field: impl Fn(f64) -> Result<LatticeField>,
    weight: impl Fn(f64, f64) -> f64,
) -> Result<Outcome> {
    let mut out = RatioField::new(&["t", "x", "r"], Bound::Upper);
    for &t in times {
        let f = field(t)?;
        for_each_pair(&f, reach, |i, v, x, r| {
            if v != 0 {
                out.push(&[t, x, r], f.get(i, v).abs() / weight(t, r));
            }
        });
    }
    Ok(Outcome::fitted_upper(fit_constant(&out)?).grid(json!({ "t": times, "reach": reach })))
}

/// Hölder fit with `tΦ⁻¹(t)^{power}` in the reference, `power = ±γ`.
fn holder_fit(p: &Parametrix, bf: &BoundFunctions, times: &[f64], reach: f64, gammas: &[f64], sign: f64) -> Result<Outcome> {
    let mut out = RatioField::new(&["gamma", "t", "x", "dx", "r"], Bound::Upper);
    for &t in times {
        let f = p.p_kappa_field(t)?;
        let s = bf.phi_inv_fast(t);
        let lim = ((reach / f.h) as i64).min(f.half as i64);
        for &k in &HOLDER_SHIFTS {
            let dx = k as f64 * f.h;
            for i in 0..f.n {
                let j = (i as i64 + k).rem_euclid(f.n as i64) as usize;
                for v in (-lim + k).max(-lim)..=lim.min(lim + k) {
                    let diff = (f.get(i, v) - f.get(j, v - k)).abs();
                    let g = bf.g(t, f.offset(v)).max(bf.g(t, f.offset(v - k)));
                    for &gamma in gammas {
                        let reference = dx.powf(gamma) * t * s.powf(sign * gamma) * g;
                        out.push(&[gamma, t, f.x(i), dx, f.offset(v).abs()], diff / reference);
                    }
                }
            }
        }
    }
    Ok(Outcome::fitted_upper(fit_constant(&out)?).grid(json!({ "t": times, "gamma": gammas, "shifts": HOLDER_SHIFTS })))
}

/// `φ⁻¹(t)` by bisection on `(0, 1]`.
fn small_scale_inverse(bf: &BoundFunctions, t: f64) -> f64 {
    let phi = |r: f64| bf.scale().eval_unchecked(r);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if phi(hi) <= t {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smooth bump `exp(1 - 1/(1 - (x/radius)²))` supported on `|x| < radius`.
fn bump(radius: f64) -> impl Fn(f64) -> f64 + Sync + Copy {
    move |x: f64| {
        let u = x / radius;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }
}

pub(super) fn run(env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    let model = env.model;
    let bf = model.bounds();
    let cfg = &env.config.parametrix;
    let kappa = &env.config.kappa;
    let fine = Parametrix::build(model, kappa, &cfg.solver)?;
    let coarse = Parametrix::build(model, kappa, &cfg.solver.refined(0.5))?;
    let p = &fine;
    let times = cfg.envelope_times.as_slice();
    let near = 0.5 * cfg.solver.band;
    let far = cfg.far_distance;
    let delta0 = p.delta0();
    let q_weight = |t: f64, r: f64| bf.g_gamma_delta(delta0, 0.0, t, r) + bf.g_gamma_delta(0.0, delta0, t, r);
    let (_, alpha1) = bf.lower_scaling();
    let gammas = [0.5, (0.9 * alpha1).min(1.0)];

    let checks = vec![
        check("parametrix.constant_reduction", || {
            let c = cfg.constant_kappa;
            let reduced = Parametrix::build(model, &KappaSpec::Constant { value: c }, &cfg.solver)?;
            let sym = SymmetricKernel::new(model, FreezeKernel::Constant(1.0))?;
            let mut table = Table::new("", &["t", "sup_error", "offset"]);
            let mut worst = 0.0f64;
            for &t in times {
                let f = reduced.p_kappa_field(t)?;
                let plan = sym.plan(c * t)?;
                let (mut err, mut at) = (0.0f64, 0.0);
                for i in [0, f.n / 3] {
                    for v in -(f.half as i64)..=f.half as i64 {
                        let e = (f.get(i, v) - plan.value(f.offset(v))).abs();
                        if e > err {
                            err = e;
                            at = f.offset(v);
                        }
                    }
                }
                worst = worst.max(err);
                table.push(vec![t, err, at]);
            }
            let norms = &reduced.trace().norms;
            Ok(Outcome::at_most(worst, REDUCTION_TOLERANCE)
                .table(table)
                .detail(json!({ "kappa": c, "picard_norms": norms }))
                .grid(json!({ "t": times, "band": cfg.solver.band })))
        }),
        check("parametrix.picard_trace", || {
            let tr = p.trace();
            let mut table = Table::new("", &["n", "weighted_norm", "ratio", "beta_factor"]);
            for (n, &norm) in tr.norms.iter().enumerate() {
                let ratio = if n == 0 { f64::NAN } else { tr.ratios[n - 1] };
                let beta = tr.beta_factors.get(n).copied().unwrap_or(f64::NAN);
                table.push(vec![n as f64, norm, ratio, beta]);
            }
            let tail = &tr.ratios[tr.ratios.len().saturating_sub(PICARD_TAIL)..];
            let worst = if tr.converged && !tail.is_empty() { tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) } else { f64::NAN };
            Ok(Outcome::at_most(worst, PICARD_RATIO_LIMIT).table(table).detail(json!({
                "terms": tr.norms.len(),
                "converged": tr.converged,
                "delta0": tr.delta0,
                "tol": tr.tol,
                "tail_ratios": tail,
            })))
        }),
        check("parametrix.q0_envelope", || {
            field_envelope(times, near, |t| Ok(p.q0_field(t)), |t, r| bf.g_gamma_delta(0.0, delta0, t, r))
        }),
        check("parametrix.q_envelope", || field_envelope(times, near, |t| p.q_field(t), q_weight)),
        check("parametrix.phi_envelope", || {
            let mut table = Table::new("", &["t", "sup_abs_phi"]);
            for &t in times {
                let f = p.phi_field(t)?;
                table.push(vec![t, f.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))]);
            }
            Ok(field_envelope(times, near, |t| p.phi_field(t), |t, r| t * q_weight(t, r))?.table(table))
        }),
        check("parametrix.mass", || {
            let mut table = Table::new("", &["t", "min_mass", "max_mass"]);
            let mut worst = 0.0f64;
            for &t in &cfg.mass_times {
                let m = p.mass(t)?;
                let (lo, hi) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                worst = worst.max((lo - 1.0).abs()).max((hi - 1.0).abs());
                table.push(vec![t, lo, hi]);
            }
            Ok(Outcome::at_most(worst, MASS_TOLERANCE).table(table).grid(json!({ "t": cfg.mass_times, "cell_nodes": p.nodes() })))
        }),
        check("parametrix.chapman_kolmogorov", || {
            let mut table = Table::new("", &["t", "s", "sup_error", "x", "y"]);
            let mut worst = 0.0f64;
            for &(t, s) in &cfg.chapman_kolmogorov_pairs {
                let r = p.chapman_kolmogorov(t, s)?;
                worst = worst.max(r.value);
                table.push(vec![t, s, r.value, r.x, r.y]);
            }
            Ok(Outcome::at_most(worst, CK_TOLERANCE).table(table).grid(json!({ "pairs": cfg.chapman_kolmogorov_pairs })))
        }),
        check("parametrix.nonnegativity", || {
            let mut lowest = (f64::INFINITY, 0.0, 0.0, 0.0);
            for &t in times {
                let f = p.p_kappa_field(t)?;
                let (m, i, v) = f.min();
                if m < lowest.0 {
                    lowest = (m, t, f.x(i), f.x(i) + f.offset(v));
                }
            }
            Ok(Outcome::at_least(lowest.0, -NEGATIVITY_TOLERANCE)
                .detail(json!({ "at": { "t": lowest.1, "x": lowest.2, "y": lowest.3 } }))
                .grid(json!({ "t": times, "band": cfg.solver.band })))
        }),
        check("parametrix.upper_envelope", || {
            let mut plot = Table::new("pkappa_profile", &["t", "y", "p_kappa", "t_g"]);
            for &t in &PROFILE_TIMES {
                let f = p.p_kappa_field(t)?;
                for v in -(f.half as i64)..=f.half as i64 {
                    let y = f.offset(v);
                    plot.push(vec![t, y, f.get(0, v), t * bf.g(t, y)]);
                }
            }
            Ok(kernel_fit(Bound::Upper, p, Some(&coarse), times, |_| (0.0, far), |t, r, v| v / (t * bf.g(t, r)))?.plot(plot))
        }),
        check("parametrix.near_diagonal_lower", || {
            kernel_fit(
                Bound::Lower,
                p,
                Some(&coarse),
                times,
                |t| (0.0, 0.5 * bf.phi_inv_fast(t)),
                |t, _, v| v * bf.phi_inv_fast(t),
            )
        }),
        check("parametrix.off_diagonal_lower", || {
            let jump = model.jump();
            kernel_fit(
                Bound::Lower,
                p,
                None,
                times,
                |t| (bf.phi_inv_fast(t) * (1.0 + 1e-12), far),
                |t, r, v| v / (t * jump.j(r)),
            )
        }),
        check("parametrix.pde_residual", || {
            let mut table = Table::new("", &["t", "relative_residual", "x", "y"]);
            let mut worst = 0.0f64;
            for &t in &cfg.residual_times {
                let r = p.pde_residual(t)?;
                worst = worst.max(r.value);
                table.push(vec![t, r.value, r.x, r.y]);
            }
            Ok(Outcome::at_most(worst, RESIDUAL_TOLERANCE).table(table).grid(json!({ "t": cfg.residual_times })))
        }),
        check("parametrix.generator_envelope", || {
            let mut out = RatioField::new(&["eps", "t", "x", "r"], Bound::Upper);
            let mut table = Table::new("", &["eps", "sup_ratio"]);
            for &eps in &cfg.epsilons {
                let mut sup = 0.0f64;
                for &t in times {
                    if eps == 0.0 {
                        let f = p.generator_field(t)?;
                        for_each_pair(&f, near, |i, v, x, r| {
                            let q = f.get(i, v).abs() / bf.g_tilde(t, r);
                            sup = sup.max(q);
                            out.push(&[eps, t, x, r], q);
                        });
                    } else {
                        let n = p.nodes();
                        for i in [0, n / 4, n / 2, 3 * n / 4] {
                            for &v in GENERATOR_OFFSETS.iter().filter(|&&v| v as f64 * p.step() <= near) {
                                for v in if v == 0 { vec![0] } else { vec![v, -v] } {
                                    let r = (v as f64 * p.step()).abs();
                                    let q = p.l_eps(t, i, v, eps)?.abs() / bf.g_tilde(t, r);
                                    sup = sup.max(q);
                                    out.push(&[eps, t, i as f64 * p.step(), r], q);
                                }
                            }
                        }
                    }
                }
                table.push(vec![eps, sup]);
            }
            Ok(Outcome::fitted_upper(fit_constant(&out)?).table(table).grid(json!({
                "eps": cfg.epsilons,
                "t": times,
                "offsets": GENERATOR_OFFSETS,
            })))
        }),
        check("parametrix.holder", || holder_fit(p, bf, times, near, &gammas, 1.0)),
        check("parametrix.holder_scaled", || holder_fit(p, bf, times, near, &gammas, -1.0)),
        check("parametrix.continuity_t0", || {
            let w = cfg.continuity_width;
            let f = move |y: f64| (-0.5 * (y / w).powi(2)).exp();
            let shifts = (4.0 * w / p.cell()).ceil() as i64;
            let mut table = Table::new("", &["t", "sup_error"]);
            let mut errors = Vec::new();
            for &t in &cfg.continuity_times {
                let applied = p.apply(t, f, -shifts..=shifts)?;
                let err = applied.iter().map(|&(x, v)| (v - f(x)).abs()).fold(0.0, f64::max);
                errors.push(err);
                table.push(vec![t, err]);
            }
            let decreasing = errors.windows(2).all(|e| e[1] < e[0]);
            let last = *errors.last().expect("continuity times are non-empty");
            let value = if decreasing { last } else { f64::INFINITY };
            Ok(Outcome::at_most(value, CONTINUITY_TOLERANCE)
                .table(table)
                .detail(json!({ "decreasing": decreasing, "smallest_time_error": last }))
                .grid(json!({ "t": cfg.continuity_times, "width": w })))
        }),
        check("parametrix.generator_limit", || {
            let radius = cfg.generator_radius;
            let t = cfg.generator_time;
            let f = bump(radius);
            let shifts = (radius / p.cell()).ceil() as i64;
            let applied = p.apply(t, f, -shifts..=shifts - 1)?;
            let mut table = Table::new("", &["x", "difference_quotient", "generator"]);
            let (mut err, mut norm) = (0.0f64, 0.0f64);
            for &(x, v) in &applied {
                let lf = p.generator(f, x, 0.1 * radius)?;
                let dq = (v - f(x)) / t;
                err = err.max((dq - lf).abs());
                norm = norm.max(lf.abs());
                table.push(vec![x, dq, lf]);
            }
            Ok(Outcome::at_most(err / norm, GENERATOR_LIMIT_TOLERANCE)
                .table(table)
                .detail(json!({ "sup_error": err, "sup_generator": norm }))
                .grid(json!({ "t": t, "radius": radius })))
        }),
        check("parametrix.corollary_near", || {
            let reference = |t: f64, r: f64| {
                let diag = 1.0 / small_scale_inverse(bf, t);
                if r == 0.0 {
                    diag
                } else {
                    diag.min(t / (r * bf.scale().eval_unchecked(r)))
                }
            };
            kernel_fit(Bound::TwoSided, p, None, times, |_| (0.0, 1.0), |t, r, v| v / reference(t, r))
        }),
        check("parametrix.corollary_far", || {
            let (b, beta) = (bf.b(), bf.beta());
            kernel_fit(Bound::Lower, p, None, times, |_| (1.0 + 1e-12, far), |t, r, v| v / (t * (-b * r.powf(beta)).exp()))
        }),
    ];
    Ok(execute(Suite::Parametrix, env.profile, manifest, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{LevyModel, ModelSpec};

    #[test]
    fn small_scale_inverse_inverts_the_power_family() {
        let m = LevyModel::new(ModelSpec::default()).unwrap();
        let bf = m.bounds();
        let (_, alpha) = bf.lower_scaling();
        for t in [1e-3, 0.01, 0.3, 1.0] {
            assert!((small_scale_inverse(bf, t) - t.powf(1.0 / alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_is_supported_in_its_radius() {
        let f = bump(4.0);
        assert_eq!(f(0.0), 1.0);
        assert_eq!(f(4.0), 0.0);
        assert!(f(3.9) > 0.0 && f(3.9) < 1e-8);
    }
}
