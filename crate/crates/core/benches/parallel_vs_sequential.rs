use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmeta::estimation::{fit_resonant_mode, FixedGroup, ModeFitOptions};
use qmeta::lindblad::{compare_at_detunings, OracleQubit, TruncatedSystem};
use qmeta::scenarios::{scenario_config, Scenario};
use qmeta::sweep::run_sweep;
use qmeta::units::mhz;
use qmeta::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let cfg = scenario_config(Scenario::S, 1);
    let mut group = c.benchmark_group("run_sweep");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_sweep(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

fn mode_fit(c: &mut Criterion) {
    let cfg = scenario_config(Scenario::S, 1);
    let mode = cfg.resonators[&3];
    let trace = run_sweep(&cfg, Execution::default())
        .unwrap()
        .into_iter()
        .find(|t| t.mode() == 3)
        .unwrap();
    let fixed = FixedGroup::from_group(&cfg.ensemble.groups()[0], &mode).unwrap();
    let mut group = c.benchmark_group("fit_resonant_mode");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = ModeFitOptions { execution: exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_resonant_mode(black_box(&trace), &mode, &fixed, &opts).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let kappa = mhz(0.46);
    let q = OracleQubit { detuning: 0.0, coupling: mhz(4.9), gamma_phi: mhz(141.0), gamma_1: mhz(141.0) };
    let template = TruncatedSystem::new(vec![q], 6, kappa, 0.05 * kappa).unwrap();
    let detunings: Vec<f64> = (0..41).map(|k| mhz(-700.0 + 35.0 * k as f64)).collect();
    let mut group = c.benchmark_group("compare_at_detunings");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| compare_at_detunings(black_box(&template), &detunings, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, mode_fit, oracle);
criterion_main!(benches);
