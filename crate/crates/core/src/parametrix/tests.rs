use std::sync::LazyLock;

use super::*;
use crate::levy_model::ModelSpec;
use crate::symmetric_heat_kernel::SymmetricKernel;

fn coarse() -> ParametrixConfig {
    ParametrixConfig {
        cell_nodes: 48,
        band: 6.0,
        t_min: 1e-3,
        time_ratio: 1.4,
        sigma_per_decade: 16,
        required_times: vec![0.01, 0.05, 0.1, 0.2, 0.25, 0.5],
        ..ParametrixConfig::default()
    }
}

fn model() -> LevyModel {
    LevyModel::new(ModelSpec::default()).unwrap()
}

static BUILT_IN: LazyLock<Parametrix> =
    LazyLock::new(|| Parametrix::build(&model(), &KappaSpec::default(), &coarse()).unwrap());

#[test]
fn constant_kappa_reduces_to_time_changed_kernel() {
    let m = model();
    let c = 1.3;
    let p = Parametrix::build(&m, &KappaSpec::Constant { value: c }, &coarse()).unwrap();
    assert_eq!(p.trace().norms, vec![0.0]);
    let sym = SymmetricKernel::new(&m, FreezeKernel::Constant(1.0)).unwrap();
    for t in [0.05, 0.25] {
        let f = p.p_kappa_field(t).unwrap();
        for i in [0, 7, 30] {
            for v in [-20, 0, 3, 29] {
                let exact = sym.p(c * t, f.offset(v)).unwrap();
                assert!((f.get(i, v) - exact).abs() <= 1e-12 * exact.max(1.0));
            }
        }
    }
}

#[test]
fn constant_kappa_generator_matches_symmetric_generator() {
    let m = model();
    let c = 0.8;
    let p = Parametrix::build(&m, &KappaSpec::Constant { value: c }, &coarse()).unwrap();
    let sym = SymmetricKernel::new(&m, FreezeKernel::Constant(c)).unwrap();
    let t = 0.1;
    for (i, v) in [(3usize, 4i64), (10, -9)] {
        let y = (i as i64 + v) as f64 * p.step();
        let x = i as f64 * p.step();
        let plan = sym.plan(t).unwrap();
        for eps in [0.0, 0.1] {
            let direct = generator_apply(|u| plan.value(u - y), x, &FreezeKernel::Constant(c), m.jump().as_ref(), eps, 0.1).unwrap();
            let got = p.l_eps(t, i, v, eps).unwrap();
            assert!((got - direct).abs() <= 1e-6 * direct.abs().max(1e-3), "eps {eps}: {got} vs {direct}");
        }
    }
}

#[test]
fn lattice_q0_matches_singular_quadrature() {
    let cfg = ParametrixConfig { sigma_per_decade: 48, ..coarse() };
    let p = Parametrix::build(&model(), &KappaSpec::default(), &cfg).unwrap();
    for t in [0.25, 0.5] {
        let q0 = p.q0_field(t);
        let scale = q0.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, v) in [(0usize, 1i64), (5, -3), (12, 8), (30, 20), (40, -25)] {
            let x = q0.x(i);
            let y = x + q0.offset(v);
            let direct = p.q0_direct(t, x, y).unwrap();
            assert!((q0.get(i, v) - direct).abs() <= 1e-5 * scale, "t {t} ({i},{v}): {} vs {direct}", q0.get(i, v));
        }
        for i in 0..q0.n {
            assert_eq!(q0.get(i, 0), 0.0);
        }
    }
}

#[test]
fn picard_terms_decay_geometrically() {
    let tr = BUILT_IN.trace();
    assert!(tr.converged);
    assert!(*tr.norms.last().unwrap() <= tr.tol * tr.norms[0]);
    let tail = &tr.ratios[tr.ratios.len().saturating_sub(3)..];
    assert!(tail.iter().all(|&r| r < 0.5), "{:?}", tr.ratios);
}

#[test]
fn doubling_the_oscillation_doubles_q0() {
    let m = model();
    let cfg = coarse();
    let base = LeviSetup::new(&m, &KappaSpec::Cosine { mean: 1.0, amplitude: 0.3, frequency: 1.0 }, &cfg).unwrap();
    let double = LeviSetup::new(&m, &KappaSpec::Cosine { mean: 1.0, amplitude: 0.6, frequency: 1.0 }, &cfg).unwrap();
    let ratio = double.q0_weighted_norm() / base.q0_weighted_norm();
    assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn kernel_is_conservative_and_satisfies_chapman_kolmogorov() {
    let p = &*BUILT_IN;
    for t in [0.1, 0.25, 0.5] {
        let dev = p.mass(t).unwrap().iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "mass deviation {dev} at t = {t}");
    }
    let ck = p.chapman_kolmogorov(0.25, 0.25).unwrap();
    assert!(ck.value < 1e-3, "{ck:?}");
}

#[test]
fn kernel_is_nonnegative_and_solves_the_equation() {
    let p = &*BUILT_IN;
    for t in [0.01, 0.1, 0.5] {
        let (min, i, v) = p.p_kappa_field(t).unwrap().min();
        assert!(min >= -1e-8, "min {min} at ({i}, {v}), t = {t}");
    }
    let r = p.pde_residual(0.25).unwrap();
    assert!(r.value < 5e-3, "{r:?}");
}

#[test]
fn correction_vanishes_as_time_shrinks() {
    let p = &*BUILT_IN;
    let sup = |t: f64| p.phi_field(t).unwrap().values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (a, b, c) = (sup(0.01), sup(0.1), sup(0.5));
    assert!(a < b && b < c, "{a} {b} {c}");
}

#[test]
fn off_grid_times_interpolate_between_master_times() {
    let p = &*BUILT_IN;
    let a = p.p_kappa_field(0.2).unwrap();
    let b = p.p_kappa_field(0.2 * (1.0 + 1e-6)).unwrap();
    let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-5, "{diff}");
}

#[test]
fn truncated_generator_gap_scales_like_small_jump_mass() {
    // L - L^ε ≈ ∂²p ∫_0^ε z² κ J dz ∝ ε^{2-α}
    let p = &*BUILT_IN;
    let t = 0.25;
    let full = p.l_eps(t, 4, 6, 0.0).unwrap();
    let gap = |eps: f64| full - p.l_eps(t, 4, 6, eps).unwrap();
    let (g1, g2) = (gap(0.1), gap(0.01));
    let expected = 0.1f64.powf(2.0 - 1.2);
    let ratio = g2 / g1;
    assert!((0.5 * expected..2.0 * expected).contains(&ratio), "ratio {ratio}, expected about {expected}");
}

#[test]
fn anchor_bank_handles_non_factorized_kappa() {
    let m = model();
    let kappa = KappaSpec::CosineBump { mean: 1.0, amplitude: 0.3, frequency: 1.0, width: 1.0 };
    let cfg = ParametrixConfig { cell_nodes: 32, band: 4.0, sigma_per_decade: 48, ..coarse() };
    let p = Parametrix::build(&m, &kappa, &cfg).unwrap();
    let t = 0.5;
    let q0 = p.q0_field(t);
    let scale = q0.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (i, v) in [(2usize, 3i64), (9, -5)] {
        let direct = p.q0_direct(t, q0.x(i), q0.x(i) + q0.offset(v)).unwrap();
        assert!((q0.get(i, v) - direct).abs() <= 1e-5 * scale, "{} vs {direct}", q0.get(i, v));
    }
    let dev = p.mass(t).unwrap().iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev < 2e-3, "{dev}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = ParametrixConfig { cell_nodes: 15, ..coarse() };
    assert!(matches!(bad.validate(), Err(Error::InvalidParameter { .. })));
    let bad = ParametrixConfig { tol: 0.0, ..coarse() };
    assert!(bad.validate().is_err());
    let bad = ParametrixConfig { required_times: vec![2.0], ..coarse() };
    assert!(LeviSetup::new(&model(), &KappaSpec::default(), &bad).is_err());
}
