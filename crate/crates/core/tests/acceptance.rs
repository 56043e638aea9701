//! Acceptance gate: one PASS/FAIL line per criterion, run on the shipped defaults.
//!
//! Runs without the libtest harness so the criterion lines are always printed.

use std::process::ExitCode;
use std::time::Instant;

use levikernel_core::verify::{run_config, CheckRecord, Config, RunOptions, Suite, VerificationReport, STABILITY_LIMIT};

struct Run {
    report: VerificationReport,
    seconds: f64,
}

fn run(config: &Config, suite: Suite) -> Run {
    let start = Instant::now();
    let report = run_config(config, &RunOptions { suites: vec![suite], ..Default::default() }).expect("suite runs");
    Run { report, seconds: start.elapsed().as_secs_f64() }
}

struct Criterion {
    number: usize,
    title: &'static str,
    failures: Vec<String>,
    runtime: Option<(f64, f64)>,
}

impl Criterion {
    fn new(number: usize, title: &'static str) -> Self {
        Criterion { number, title, failures: Vec::new(), runtime: None }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    /// Every listed check must be present for some profile and pass for all profiles that run it.
    fn checks(&mut self, runs: &[&Run], ids: &[&str]) {
        for id in ids {
            let records: Vec<&CheckRecord> = runs.iter().flat_map(|r| r.report.checks.iter()).filter(|c| c.id == *id).collect();
            self.require(!records.is_empty(), || format!("{id} did not run"));
            for c in records {
                self.require(c.pass, || format!("{id}[{}] value {:e}{}", c.profile, c.value, c.error.as_ref().map(|e| format!(" ({e})")).unwrap_or_default()));
            }
        }
    }

    /// The listed fitted checks must carry a refinement delta below the stability limit.
    fn refined(&mut self, run: &Run, ids: &[&str]) {
        for c in run.report.checks.iter().filter(|c| ids.contains(&c.id.as_str())) {
            let delta = c.fit.as_ref().and_then(|f| f.stability_delta);
            self.require(delta.is_some_and(|d| d < STABILITY_LIMIT), || format!("{}[{}] refinement delta {delta:?}", c.id, c.profile));
        }
    }

    fn runtime(&mut self, seconds: f64, limit: f64) {
        self.runtime = Some((seconds, limit));
        self.require(seconds < limit, || format!("runtime {seconds:.1}s exceeds {limit:.0}s"));
    }

    fn line(&self) -> String {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let time = self.runtime.map(|(s, l)| format!(" [{s:.1}s < {l:.0}s]")).unwrap_or_default();
        let mut line = format!("{status} criterion {}: {}{time}", self.number, self.title);
        for f in &self.failures {
            line.push_str(&format!("\n       {f}"));
        }
        line
    }
}

fn check_seconds(run: &Run, ids: &[&str]) -> f64 {
    run.report.checks.iter().filter(|c| ids.contains(&c.id.as_str())).map(|c| c.wall_time).sum()
}

fn main() -> ExitCode {
    let config = Config::default();
    let scale = run(&config, Suite::Scale);
    let symkernel = run(&config, Suite::Symkernel);
    let parametrix = run(&config, Suite::Parametrix);
    let simulate = run(&config, Suite::Simulate);

    let mut criteria = Vec::new();

    let mut c = Criterion::new(1, "exact scaling inequalities on randomized samples");
    let exact = [
        "scale.wsc_phi",
        "scale.phi_big_below_phi",
        "scale.wsc_inv",
        "scale.power_sum",
        "scale.gamma_monotone",
        "scale.delta_monotone",
        "scale.mixed_weights",
    ];
    c.require(config.scale.samples >= 10_000, || format!("only {} samples", config.scale.samples));
    c.require(config.scale.tolerance <= 1e-10, || format!("slack {:e}", config.scale.tolerance));
    c.checks(&[&scale], &exact);
    c.runtime(check_seconds(&scale, &exact), 30.0);
    criteria.push(c);

    let mut c = Criterion::new(2, "explicit-constant convolution bounds");
    let convolution = ["scale.time_convolution", "scale.stretched_exp_convolution", "scale.power_tail_convolution"];
    c.require(config.scale.convolution_configs >= 50, || format!("only {} configurations", config.scale.convolution_configs));
    c.require(config.scale.quadrature_budget <= 1e-6, || format!("budget {:e}", config.scale.quadrature_budget));
    c.checks(&[&scale], &convolution);
    c.runtime(check_seconds(&scale, &convolution), 120.0);
    criteria.push(c);

    let mut c = Criterion::new(3, "symmetric kernel correctness and Monte Carlo agreement");
    c.checks(
        &[&symkernel, &simulate],
        &[
            "symkernel.mass",
            "symkernel.evenness",
            "symkernel.unimodality",
            "symkernel.chapman_kolmogorov",
            "symkernel.derivatives_fd",
            "simulate.kde_fourier",
        ],
    );
    c.runtime(symkernel.seconds + simulate.seconds, 600.0);
    criteria.push(c);

    let mut c = Criterion::new(4, "bound-function envelopes of the symmetric kernel");
    let envelopes = [
        "symkernel.upper_envelope",
        "symkernel.gradient_envelope_0",
        "symkernel.gradient_envelope_1",
        "symkernel.gradient_envelope_2",
        "symkernel.second_difference",
        "symkernel.abs_delta_integral",
        "symkernel.holder_pairs",
    ];
    c.checks(&[&symkernel], &envelopes);
    c.refined(&symkernel, &envelopes);
    c.runtime(symkernel.seconds, 900.0);
    criteria.push(c);

    let mut c = Criterion::new(5, "constant-coefficient reduction and Picard trace");
    c.checks(&[&parametrix], &["parametrix.constant_reduction", "parametrix.picard_trace"]);
    c.runtime(parametrix.seconds, 300.0);
    criteria.push(c);

    let mut c = Criterion::new(6, "non-symmetric kernel with κ = 1 + 0.3 cos x");
    c.require(config.parametrix.mass_times == [0.1, 0.25, 0.5], || format!("mass times {:?}", config.parametrix.mass_times));
    c.require(config.parametrix.epsilons == [0.0, 0.01, 0.1, 1.0], || format!("ε values {:?}", config.parametrix.epsilons));
    c.require(config.parametrix.far_distance >= 6.0, || format!("far distance {}", config.parametrix.far_distance));
    c.checks(
        &[&parametrix],
        &[
            "parametrix.mass",
            "parametrix.chapman_kolmogorov",
            "parametrix.nonnegativity",
            "parametrix.upper_envelope",
            "parametrix.near_diagonal_lower",
            "parametrix.off_diagonal_lower",
            "parametrix.pde_residual",
            "parametrix.generator_envelope",
            "parametrix.holder",
            "parametrix.holder_scaled",
            "parametrix.continuity_t0",
            "parametrix.generator_limit",
        ],
    );
    c.refined(&parametrix, &["parametrix.upper_envelope"]);
    c.runtime(parametrix.seconds, 3600.0);
    criteria.push(c);

    let mut c = Criterion::new(7, "sharp two-sided estimate for the power scale function");
    c.checks(&[&parametrix], &["parametrix.corollary_near", "parametrix.corollary_far"]);
    criteria.push(c);

    let mut c = Criterion::new(8, "continuity in the coefficient 𝔎");
    c.require(config.symkernel.continuity_steps.len() >= 3, || "fewer than three steps".into());
    c.checks(&[&symkernel], &["symkernel.continuity_in_k"]);
    criteria.push(c);

    let mut c = Criterion::new(9, "exit-time probability below one half");
    c.require(config.sampler.exit_paths >= 100_000, || format!("only {} paths", config.sampler.exit_paths));
    c.require(config.sampler.exit_radii == [0.1, 0.3, 1.0], || format!("radii {:?}", config.sampler.exit_radii));
    c.checks(&[&simulate], &["simulate.exit_lambda"]);
    c.runtime(simulate.seconds, 600.0);
    criteria.push(c);

    println!();
    for c in &criteria {
        println!("{}", c.line());
    }
    let failed: Vec<usize> = criteria.iter().filter(|c| !c.failures.is_empty()).map(|c| c.number).collect();
    if failed.is_empty() {
        println!("acceptance: {}/{} criteria passed", criteria.len(), criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
