use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use levikernel_core::levy_model::psi_direct;
use levikernel_core::{FreezeKernel, KappaSpec, LevyModel, ModelSpec, Parametrix, ParametrixConfig, SamplerConfig, SymmetricKernel};

fn model() -> LevyModel {
    LevyModel::new(ModelSpec::default()).unwrap()
}

fn kernel() -> FreezeKernel {
    FreezeKernel::Gaussian { base: 1.0, amplitude: 0.3, width: 1.0 }
}

fn symbols(c: &mut Criterion) {
    let model = model();
    let k = kernel();
    let table = model.table(&k).unwrap();
    c.bench_function("psi_direct", |b| b.iter(|| psi_direct(&k, model.jump().as_ref(), black_box(3.7)).unwrap()));
    c.bench_function("psi_table", |b| b.iter(|| table.eval(black_box(3.7))));
}

fn inversion(c: &mut Criterion) {
    let model = model();
    let sym = SymmetricKernel::new(&model, kernel()).unwrap();
    let plan = sym.plan(0.1).unwrap();
    c.bench_function("inversion_plan_t0.1", |b| b.iter(|| SymmetricKernel::new(&model, kernel()).unwrap().plan(black_box(0.1)).unwrap()));
    c.bench_function("inversion_value", |b| b.iter(|| plan.value(black_box(0.7))));
    c.bench_function("inversion_derivatives", |b| b.iter(|| plan.derivatives(black_box(0.7))));
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("abs_delta_integral", |b| b.iter(|| sym.abs_delta_integral(0.1, black_box(0.7)).unwrap()));
    group.finish();
}

fn sampler(c: &mut Criterion) {
    let model = model();
    let k = kernel();
    let cfg = SamplerConfig::new(&model, &k, 1e-3, 10_000, 7).unwrap();
    let mut group = c.benchmark_group("sampler");
    group.sample_size(10);
    group.bench_function("increments_10k", |b| b.iter(|| cfg.sample_increments(black_box(0.1))));
    group.finish();
}

fn levi(c: &mut Criterion) {
    let model = model();
    let config = ParametrixConfig { cell_nodes: 32, band: 4.0, required_times: vec![0.1, 0.5], ..ParametrixConfig::default() };
    let mut group = c.benchmark_group("parametrix");
    group.sample_size(10).measurement_time(Duration::from_secs(30));
    group.bench_function("build_32_nodes", |b| b.iter(|| Parametrix::build(&model, &KappaSpec::default(), &config).unwrap()));
    group.finish();
}

criterion_group!(benches, symbols, inversion, sampler, levi);
criterion_main!(benches);
