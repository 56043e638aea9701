//! Verification suites, constant fitting and reports.
//!
//! A run loads a [`Config`], builds the fields every suite needs once per
//! profile, then evaluates the suite's checks concurrently on a bounded
//! worker pool.  Each check yields a [`CheckRecord`]; the collection is
//! written as `report.json` together with per-check CSV tables and plot data.

pub mod config;
pub mod fit;
pub mod report;
mod suites;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{Config, KernelSpec, ModelChecks, ParametrixChecks, Profile, ScaleChecks, SymkernelChecks, CONFIG_SCHEMA};
pub use fit::{fit_constant, Bound, Fit, RatioField};
pub use report::{CheckRecord, Outcome, Table, Tolerance, VerificationReport, REPORT_SCHEMA, STABILITY_LIMIT};

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;

/// A group of checks sharing the fields they are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Scale,
    Model,
    Symkernel,
    Parametrix,
    Simulate,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Scale, Suite::Model, Suite::Symkernel, Suite::Parametrix, Suite::Simulate];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Scale => "scale",
            Suite::Model => "model",
            Suite::Symkernel => "symkernel",
            Suite::Parametrix => "parametrix",
            Suite::Simulate => "simulate",
        }
    }

    /// Parses a comma-separated selector such as `scale,model` or `all`.
    pub fn parse_selector(selector: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for part in selector.split(',').map(str::trim) {
            if part == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::UnknownSuite { name: s.to_string() })
    }
}

/// Options of a run that are not part of the config file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub suites: Vec<Suite>,
    /// Resolution multiplier applied to the config.
    pub refine: u32,
    /// Overrides both the config seed and the sampler seed.
    pub seed: Option<u64>,
    /// Size of the worker pool; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { suites: Suite::ALL.to_vec(), refine: 1, seed: None, workers: None }
    }
}

/// Everything a suite needs for one profile.
pub(crate) struct Env<'a> {
    pub config: &'a Config,
    pub profile: &'a Profile,
    pub model: &'a LevyModel,
}

/// A single check: its id, what it tests, and how to evaluate it.
pub(crate) struct Check<'a> {
    pub id: &'static str,
    pub eval: Box<dyn Fn() -> Result<Outcome> + Send + Sync + 'a>,
}

pub(crate) fn check<'a>(id: &'static str, eval: impl Fn() -> Result<Outcome> + Send + Sync + 'a) -> Check<'a> {
    Check { id, eval: Box::new(eval) }
}

/// The ids enabled for `suite` on `profile`, in report order, with their anchors.
pub fn suite_manifest(suite: Suite, profile: &Profile) -> Vec<(&'static str, &'static str)> {
    suites::manifest(suite, &profile.model)
}

/// `(profile, id)` of every check a run with these suites must report.
pub fn manifest(config: &Config, suites: &[Suite]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for &s in suites {
        for p in &config.profiles {
            out.extend(suite_manifest(s, p).into_iter().map(|(id, _)| (p.name.clone(), id.to_string())));
        }
    }
    out
}

fn anchor_of(manifest: &[(&'static str, &'static str)], id: &str) -> &'static str {
    manifest.iter().find(|(i, _)| *i == id).map(|(_, a)| *a).unwrap_or("")
}

/// Evaluates `checks` concurrently and matches them against the manifest.
pub(crate) fn execute(suite: Suite, profile: &Profile, manifest: &[(&'static str, &'static str)], checks: Vec<Check<'_>>) -> Vec<CheckRecord> {
    let ids: Vec<&str> = checks.iter().map(|c| c.id).collect();
    let expected: Vec<&str> = manifest.iter().map(|(id, _)| *id).collect();
    assert_eq!(ids, expected, "{suite} checks out of sync with the manifest");
    checks
        .par_iter()
        .map(|c| {
            let anchor = anchor_of(manifest, c.id);
            let start = Instant::now();
            let res = (c.eval)();
            let wall = start.elapsed().as_secs_f64();
            match res {
                Ok(o) => CheckRecord::from_outcome(c.id, suite, &profile.name, anchor, o, wall),
                Err(e) => CheckRecord::failed(c.id, suite, &profile.name, anchor, e.to_string(), wall),
            }
        })
        .collect()
}

fn run_suite(suite: Suite, config: &Config, profile: &Profile) -> Vec<CheckRecord> {
    let manifest = suite_manifest(suite, profile);
    let start = Instant::now();
    let model = match LevyModel::new(profile.model.clone()) {
        Ok(m) => m,
        Err(e) => {
            return manifest
                .iter()
                .map(|(id, a)| CheckRecord::failed(id, suite, &profile.name, a, e.to_string(), start.elapsed().as_secs_f64()))
                .collect()
        }
    };
    let env = Env { config, profile, model: &model };
    match suites::run(suite, &env, &manifest) {
        Ok(records) => records,
        Err(e) => {
            let msg = format!("field construction failed: {e}");
            manifest
                .iter()
                .map(|(id, a)| CheckRecord::failed(id, suite, &profile.name, a, msg.clone(), start.elapsed().as_secs_f64()))
                .collect()
        }
    }
}

/// Runs the selected suites on every profile of `config`.
pub fn run_config(config: &Config, options: &RunOptions) -> Result<VerificationReport> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
        config.sampler.seed = seed;
    }
    config.validate()?;
    if options.refine == 0 {
        return Err(Error::param("refine", "must be at least 1"));
    }
    let effective = config.refined(options.refine);
    let body = || {
        let start = Instant::now();
        let mut checks = Vec::new();
        for &suite in &options.suites {
            for profile in &effective.profiles {
                checks.extend(run_suite(suite, &effective, profile));
            }
        }
        (checks, start.elapsed().as_secs_f64())
    };
    let (checks, wall) = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?
            .install(body),
        None => body(),
    };
    let plots = checks
        .iter()
        .flat_map(|c| c.outcome_plots.iter().map(move |p| plot_path(&c.profile, &p.name)))
        .collect();
    Ok(VerificationReport::new(config, options.suites.clone(), options.refine, checks, plots, wall))
}

fn plot_path(profile: &str, name: &str) -> String {
    format!("plots/{name}_{profile}.csv")
}

/// Writes `report.json`, the per-check tables and the plot data under `out`.
pub fn write_outputs(report: &VerificationReport, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    for c in &report.checks {
        for (t, rel) in c.outcome_tables.iter().zip(&c.tables) {
            t.write_csv(&out.join(rel))?;
        }
        for p in &c.outcome_plots {
            p.write_csv(&out.join(plot_path(&c.profile, &p.name)))?;
        }
    }
    let path = out.join("report.json");
    std::fs::write(&path, report.to_json()? + "\n")?;
    Ok(path)
}

/// Loads the config at `config_path`, runs the selected suites and writes the
/// outputs to `out`.
pub fn run(config_path: &Path, selector: &str, out: &Path, refine: u32, seed: Option<u64>, workers: Option<usize>) -> Result<VerificationReport> {
    let suites = Suite::parse_selector(selector)?;
    let config = Config::from_path(config_path)?;
    let report = run_config(&config, &RunOptions { suites, refine, seed, workers })?;
    write_outputs(&report, out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_parse_and_reject_unknown_names() {
        assert_eq!(Suite::parse_selector("all").unwrap(), Suite::ALL.to_vec());
        assert_eq!(Suite::parse_selector("model,scale,model").unwrap(), vec![Suite::Scale, Suite::Model]);
        let err = Suite::parse_selector("scale,heat").unwrap_err();
        assert!(matches!(&err, Error::UnknownSuite { name } if name == "heat"));
        assert!(err.to_string().contains("symkernel"));
    }

    #[test]
    fn manifest_ids_are_unique_per_profile() {
        let c = Config::default();
        let m = manifest(&c, &Suite::ALL);
        let mut keys: Vec<_> = m.iter().collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), m.len());
    }

    #[test]
    fn manifest_is_documented() {
        let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/checks.md")).unwrap();
        for (_, id) in manifest(&Config::default(), &Suite::ALL) {
            assert!(doc.contains(&format!("`{id}`")), "{id} missing from docs/checks.md");
        }
    }
}
