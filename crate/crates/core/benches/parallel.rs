//! One worker thread against every core, for the simulator and the
//! forecasting experiment. Build with `--no-default-features` to time the
//! sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use regretcast::evaluation::Method;
use regretcast::forecast::Mode;
use regretcast::par::{available_jobs, with_jobs};
use regretcast::pipeline::{run_manifest, simulate, simulate_and_prepare, RunConfig};

fn config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.market.n_bidders = 32;
    cfg.run.methods = ["OGD", "FTRL", "AR2Econ", "RF2"].iter().map(|m| m.parse::<Method>().unwrap()).collect();
    cfg.run.modes = vec![Mode::Series, Mode::Stepahead];
    cfg.run.skip_diagnostics = true;
    cfg
}

fn job_counts() -> Vec<usize> {
    let all = available_jobs();
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("simulate");
    for jobs in job_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &jobs| {
            b.iter(|| with_jobs(jobs, || simulate(&cfg)))
        });
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let mut cfg = config();
    let (manifest, _) = simulate_and_prepare(&cfg);
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for jobs in job_counts() {
        cfg.run.jobs = jobs;
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, _| {
            b.iter(|| run_manifest(&manifest, &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_experiment);
criterion_main!(benches);
