//! JSON configuration of a verification run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{FreezeKernel, KappaSpec, ModelSpec};
use crate::parametrix::ParametrixConfig;
use crate::simulator::SamplerSpec;

/// Version tag accepted in the `schema` field of a config file.
pub const CONFIG_SCHEMA: &str = "levikernel.config/1";

/// A named model; every suite runs once per profile.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub model: ModelSpec,
}

/// Serializable translation-invariant coefficient 𝔎.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant { value: f64 },
    Gaussian { base: f64, amplitude: f64, width: f64 },
    Lorentzian { base: f64, amplitude: f64, width: f64 },
}

impl KernelSpec {
    pub fn to_kernel(&self) -> FreezeKernel {
        match *self {
            KernelSpec::Constant { value } => FreezeKernel::Constant(value),
            KernelSpec::Gaussian { base, amplitude, width } => FreezeKernel::Gaussian { base, amplitude, width },
            KernelSpec::Lorentzian { base, amplitude, width } => FreezeKernel::Lorentzian { base, amplitude, width },
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, _) = self.to_kernel().bounds();
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(Error::param("symkernel.kernel", "the coefficient must be bounded below by a positive constant"));
        }
        if let KernelSpec::Gaussian { width, .. } | KernelSpec::Lorentzian { width, .. } = *self {
            if !(width > 0.0) {
                return Err(Error::param("symkernel.kernel.width", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Settings of the scale-function suite.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleChecks {
    /// Random samples per exact inequality.
    pub samples: usize,
    /// Relative slack of exact inequalities.
    pub tolerance: f64,
    /// Sampled configurations of the explicit-constant convolution bounds.
    pub convolution_configs: usize,
    /// Relative quadrature budget of those bounds.
    pub quadrature_budget: f64,
    /// Points per decade of the comparability grids.
    pub grid_per_decade: usize,
}

impl Default for ScaleChecks {
    fn default() -> Self {
        ScaleChecks { samples: 10_000, tolerance: 1e-10, convolution_configs: 50, quadrature_budget: 1e-6, grid_per_decade: 12 }
    }
}

/// Settings of the model suite.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelChecks {
    pub samples: usize,
    pub grid_per_decade: usize,
}

impl Default for ModelChecks {
    fn default() -> Self {
        ModelChecks { samples: 10_000, grid_per_decade: 12 }
    }
}

/// Settings of the symmetric-kernel suite.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SymkernelChecks {
    /// 𝔎 of the non-constant symmetric kernel.
    pub kernel: KernelSpec,
    pub times: Vec<f64>,
    /// Envelope grids cover `|x| ≤ x_max` with `x_points` uniform points plus a
    /// geometric grid near the origin.
    pub x_max: f64,
    pub x_points: usize,
    pub chapman_kolmogorov_pairs: Vec<(f64, f64)>,
    pub fd_points: Vec<f64>,
    pub convolution_times: Vec<f64>,
    pub kappa0: f64,
    pub continuity_steps: Vec<f64>,
    pub kde_times: Vec<f64>,
}

impl Default for SymkernelChecks {
    fn default() -> Self {
        SymkernelChecks {
            kernel: KernelSpec::Gaussian { base: 1.0, amplitude: 0.3, width: 1.0 },
            times: vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0],
            x_max: 8.0,
            x_points: 161,
            chapman_kolmogorov_pairs: vec![(0.1, 0.1), (0.1, 0.4), (0.25, 0.25)],
            fd_points: vec![0.05, 0.2, 0.7, 1.5, 3.0],
            convolution_times: vec![0.1, 0.5, 1.0],
            kappa0: 0.7,
            continuity_steps: vec![0.2, 0.1, 0.05],
            kde_times: vec![0.1, 0.5],
        }
    }
}

/// Settings of the parametrix suite.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixChecks {
    pub solver: ParametrixConfig,
    /// Value of the constant κ used for the reduction check.
    pub constant_kappa: f64,
    pub mass_times: Vec<f64>,
    pub chapman_kolmogorov_pairs: Vec<(f64, f64)>,
    pub envelope_times: Vec<f64>,
    pub residual_times: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Largest `|x - y|` of the off-diagonal lower bound.
    pub far_distance: f64,
    /// Width of the Gaussian test function of the small-time continuity check.
    pub continuity_width: f64,
    pub continuity_times: Vec<f64>,
    /// Support radius of the bump of the generator-limit check.
    pub generator_radius: f64,
    pub generator_time: f64,
}

impl Default for ParametrixChecks {
    fn default() -> Self {
        ParametrixChecks {
            solver: ParametrixConfig::default(),
            constant_kappa: 1.3,
            mass_times: vec![0.1, 0.25, 0.5],
            chapman_kolmogorov_pairs: vec![(0.25, 0.25), (0.1, 0.4)],
            envelope_times: vec![0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0],
            residual_times: vec![0.1, 0.25, 0.5],
            epsilons: vec![0.0, 0.01, 0.1, 1.0],
            far_distance: 6.0,
            continuity_width: 4.0,
            continuity_times: vec![0.2, 0.1, 0.05, 0.025],
            generator_radius: 4.0,
            generator_time: 0.01,
        }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    pub profiles: Vec<Profile>,
    pub kappa: KappaSpec,
    /// Seed of the randomized inequality samples.
    pub seed: u64,
    pub scale: ScaleChecks,
    pub model: ModelChecks,
    pub symkernel: SymkernelChecks,
    pub parametrix: ParametrixChecks,
    pub sampler: SamplerSpec,
}

impl Default for Config {
    fn default() -> Self {
        let base = ModelSpec::default();
        Config {
            schema: CONFIG_SCHEMA.into(),
            profiles: vec![
                Profile { name: "beta05".into(), model: ModelSpec { beta: 0.5, ..base.clone() } },
                Profile { name: "beta1".into(), model: ModelSpec { beta: 1.0, ..base } },
            ],
            kappa: KappaSpec::default(),
            seed: 20_240_917,
            scale: ScaleChecks::default(),
            model: ModelChecks::default(),
            symkernel: SymkernelChecks::default(),
            parametrix: ParametrixChecks::default(),
            sampler: SamplerSpec::default(),
        }
    }
}

fn positive_times(field: &str, times: &[f64], horizon: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::param(field, "must not be empty"));
    }
    for &t in times {
        if !(t > 0.0 && t <= horizon) {
            return Err(Error::param(field, format!("time {t} outside (0, T]")));
        }
    }
    Ok(())
}

impl Config {
    /// Reads and validates a JSON config.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every section, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::param("schema", format!("expected `{CONFIG_SCHEMA}`, got `{}`", self.schema)));
        }
        if self.profiles.is_empty() {
            return Err(Error::param("profiles", "at least one profile is required"));
        }
        let mut names: Vec<&str> = self.profiles.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("profiles", "profile names must be unique"));
        }
        for p in &self.profiles {
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::param("profiles.name", format!("`{}` must be a non-empty [A-Za-z0-9_-] string", p.name)));
            }
            p.model.validate()?;
            if p.model.d != 1 {
                return Err(Error::param("profiles.model.d", "the kernels are implemented for d = 1"));
            }
        }
        self.kappa.validate()?;
        let horizon = self.profiles.iter().map(|p| p.model.horizon).fold(f64::INFINITY, f64::min);
        if self.scale.samples == 0 || self.scale.convolution_configs == 0 || self.scale.grid_per_decade == 0 {
            return Err(Error::param("scale", "sample counts must be positive"));
        }
        if !(self.scale.tolerance >= 0.0 && self.scale.quadrature_budget > 0.0) {
            return Err(Error::param("scale.tolerance", "tolerances must be non-negative"));
        }
        if self.model.samples == 0 || self.model.grid_per_decade == 0 {
            return Err(Error::param("model", "sample counts must be positive"));
        }
        let s = &self.symkernel;
        s.kernel.validate()?;
        positive_times("symkernel.times", &s.times, horizon)?;
        positive_times("symkernel.convolution_times", &s.convolution_times, horizon)?;
        positive_times("symkernel.kde_times", &s.kde_times, horizon)?;
        if !(s.x_max > 1.0 && s.x_points >= 11) {
            return Err(Error::param("symkernel.x_max", "need x_max > 1 and at least 11 points"));
        }
        for &(a, b) in &s.chapman_kolmogorov_pairs {
            positive_times("symkernel.chapman_kolmogorov_pairs", &[a, b, a + b], horizon)?;
        }
        if s.continuity_steps.len() < 2 || s.continuity_steps.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::param("symkernel.continuity_steps", "need at least two positive steps"));
        }
        let (k0, _) = s.kernel.to_kernel().bounds();
        if !(s.kappa0 > 0.0 && s.kappa0 < 2.0 * k0) {
            return Err(Error::param("symkernel.kappa0", "must lie in (0, 2 inf 𝔎)"));
        }
        let p = &self.parametrix;
        p.solver.validate()?;
        if !(p.constant_kappa > 0.0) {
            return Err(Error::param("parametrix.constant_kappa", "must be positive"));
        }
        for (field, times) in [
            ("parametrix.mass_times", &p.mass_times),
            ("parametrix.envelope_times", &p.envelope_times),
            ("parametrix.residual_times", &p.residual_times),
            ("parametrix.continuity_times", &p.continuity_times),
        ] {
            positive_times(field, times, horizon)?;
        }
        positive_times("parametrix.generator_time", &[p.generator_time], horizon)?;
        for &(a, b) in &p.chapman_kolmogorov_pairs {
            positive_times("parametrix.chapman_kolmogorov_pairs", &[a, b, a + b], horizon)?;
        }
        if p.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::param("parametrix.epsilons", "cutoffs must lie in [0, 1]"));
        }
        if !(p.far_distance > 1.0 && p.far_distance <= p.solver.band) {
            return Err(Error::param("parametrix.far_distance", "must lie in (1, band]"));
        }
        if !(p.continuity_width > 0.0 && p.generator_radius > 0.0) {
            return Err(Error::param("parametrix.continuity_width", "test-function scales must be positive"));
        }
        self.sampler.validate()?;
        Ok(())
    }

    /// The same run with every resolution parameter multiplied by `factor`.
    pub fn refined(&self, factor: u32) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let f = factor as usize;
        let mut c = self.clone();
        c.symkernel.x_points = (c.symkernel.x_points - 1) * f + 1;
        c.scale.grid_per_decade *= f;
        c.model.grid_per_decade *= f;
        c.parametrix.solver = c.parametrix.solver.refined(factor as f64);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        assert_eq!(Config::from_path(&path).unwrap(), Config::default());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(matches!(Config::from_json(r#"{"profiles": [], "colour": 1}"#), Err(Error::Json(_))));
        assert!(matches!(Config::from_json(r#"{"profiles": []}"#), Err(Error::InvalidParameter { .. })));
        let mut c = Config::default();
        c.profiles[0].model.alpha = 2.5;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.parametrix.epsilons = vec![2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn refinement_scales_resolution() {
        let c = Config::default().refined(2);
        assert_eq!(c.symkernel.x_points, 321);
        assert_eq!(c.parametrix.solver.cell_nodes, 256);
    }
}
