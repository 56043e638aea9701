//! The five verification suites and helpers they share.

mod model;
mod parametrix;
mod scale;
mod simulate;
mod symkernel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde_json::json;

use super::fit::{fit_constant, Bound, RatioField};
use super::report::Outcome;
use super::{CheckRecord, Env, Suite};
use crate::error::Result;
use crate::levy_model::ModelSpec;

pub(crate) fn manifest(suite: Suite, model: &ModelSpec) -> Vec<(&'static str, &'static str)> {
    let (all, tempered_only): (&[(&str, &str)], &[&str]) = match suite {
        Suite::Scale => (scale::CHECKS, scale::TEMPERED_ONLY),
        Suite::Model => (model::CHECKS, &[]),
        Suite::Symkernel => (symkernel::CHECKS, &[]),
        Suite::Parametrix => (parametrix::CHECKS, &[]),
        Suite::Simulate => (simulate::CHECKS, &[]),
    };
    all.iter().copied().filter(|(id, _)| model.beta < 1.0 || !tempered_only.contains(id)).collect()
}

pub(crate) fn run(suite: Suite, env: &Env<'_>, manifest: &[(&'static str, &'static str)]) -> Result<Vec<CheckRecord>> {
    match suite {
        Suite::Scale => scale::run(env, manifest),
        Suite::Model => model::run(env, manifest),
        Suite::Symkernel => symkernel::run(env, manifest),
        Suite::Parametrix => parametrix::run(env, manifest),
        Suite::Simulate => simulate::run(env, manifest),
    }
}

/// Per-check random stream: the run seed combined with an FNV-1a hash of the
/// check id and profile name.
pub(crate) fn rng_for(seed: u64, id: &str, profile: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes().chain([0u8]).chain(profile.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// `10^{k/per_decade}` for every integer `k` with the value in `[lo, hi]`.
///
/// Halving `per_decade` (when even) yields a subset of the points, which is how
/// the coarser refinement level of a ratio field is sampled.
pub(crate) fn decade_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = per_decade as f64;
    let k0 = (lo.log10() * n - 1e-9).ceil() as i64;
    let k1 = (hi.log10() * n + 1e-9).floor() as i64;
    (k0..=k1).map(|k| 10f64.powf(k as f64 / n)).collect()
}

/// Log-uniform sample in `[lo, hi]`.
pub(crate) fn log_uniform<R: rand::Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}

/// Largest relative excess `(lhs - rhs)/|rhs|` over a sample, with its location.
pub(crate) struct Violation {
    worst: f64,
    at: Vec<f64>,
    samples: usize,
}

impl Violation {
    pub(crate) fn new() -> Self {
        Violation { worst: f64::NEG_INFINITY, at: Vec::new(), samples: 0 }
    }

    pub(crate) fn update(&mut self, lhs: f64, rhs: f64, at: &[f64]) {
        self.samples += 1;
        let v = if lhs.is_finite() && rhs.is_finite() { (lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE) } else { f64::NAN };
        if v > self.worst || v.is_nan() {
            self.worst = v;
            self.at = at.to_vec();
        }
    }

    pub(crate) fn outcome(self, tol: f64, axes: &[&str]) -> Outcome {
        let at: serde_json::Map<String, serde_json::Value> =
            axes.iter().zip(&self.at).map(|(a, v)| (a.to_string(), json!(v))).collect();
        Outcome::at_most(self.worst, tol).detail(json!({ "relative_excess": self.worst, "at": at })).grid(json!({ "samples": self.samples }))
    }
}

/// Fits `bound` on the field built at `per_decade` points per decade, with the
/// field at half the density as the coarser refinement level.
pub(crate) fn refined_fit(bound: Bound, per_decade: usize, build: impl Fn(usize) -> Result<RatioField>) -> Result<Outcome> {
    let fine = build(per_decade)?;
    let coarse = build((per_decade / 2).max(1))?;
    Ok(Outcome::fitted(bound, fit_constant(&fine.with_coarse(coarse))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_grid_halves_to_a_subset() {
        let fine = decade_grid(1e-3, 50.0, 12);
        let coarse = decade_grid(1e-3, 50.0, 6);
        assert!((fine[0] - 1e-3).abs() < 1e-15 && *fine.last().unwrap() <= 50.0);
        assert!(coarse.iter().all(|c| fine.iter().any(|f| (f - c).abs() <= 1e-12 * c)));
    }

    #[test]
    fn streams_differ_by_id_and_profile() {
        use rand::Rng;
        let a: u64 = rng_for(1, "scale.x", "p").random();
        let b: u64 = rng_for(1, "scale.y", "p").random();
        let c: u64 = rng_for(1, "scale.x", "q").random();
        let d: u64 = rng_for(1, "scale.x", "p").random();
        assert!(a != b && a != c && a == d);
    }
}
