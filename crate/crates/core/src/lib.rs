//! Numerical construction and verification of heat kernels for non-symmetric
//! nonlocal operators
//!
//! ```text
//! L^κ f(x) = ½ ∫ (f(x+z) + f(x-z) - 2f(x)) κ(x,z) J(|z|) dz
//! ```
//!
//! with tempered jump kernels `J(r) = r^{-d-α} e^{-b r^β}`.
//!
//! The crate is organised bottom-up:
//!
//! - [`scale_functions`]: φ, Φ, Φ⁻¹, θ and the bound functions 𝒢, 𝒢_T, 𝒢̃, 𝒢_γ^δ.
//! - [`levy_model`]: jump kernels, coefficients κ and 𝔎, characteristic exponents ψ.
//! - [`symmetric_heat_kernel`]: Fourier inversion for symmetric Lévy kernels p^𝔎.
//! - [`parametrix`]: the Levi construction of p^κ.
//! - [`simulator`]: Monte Carlo oracle for symmetric kernels and exit times.
//! - [`verify`]: configuration, constant fitting, suites and reports.

pub mod error;
pub mod interp;
pub mod quad;
pub mod levy_model;
pub mod parametrix;
pub mod scale_functions;
pub mod simulator;
pub mod symmetric_heat_kernel;
pub mod verify;

pub use error::{Error, Result};
pub use scale_functions::{beta_fn, BoundFunctions, ScaleFunction, ScaleSpec};
pub use levy_model::{
    FreezeKernel, JumpKernel, KappaSpec, LevyModel, ModelSpec, PsiTable, Symbol, TemperedStable,
};
pub use symmetric_heat_kernel::{InversionPlan, KernelDerivatives, KernelField, SymmetricKernel};
pub use parametrix::{LatticeField, LatticeSup, LeviSetup, Parametrix, ParametrixConfig, PicardTrace};
pub use simulator::{ExitReport, KdeField, SamplerConfig, SamplerSpec};
