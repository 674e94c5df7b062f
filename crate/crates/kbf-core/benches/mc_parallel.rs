//! Criterion comparison of the Monte Carlo driver in sequential and
//! rayon-parallel form. Both produce bit-identical output; this measures
//! the wall-clock gap on a short desk-scale run.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kbf_core::loading::{kappa_max_from_wng, LoadingMode};
use kbf_core::scenario::ScenarioConfig;
use kbf_core::sim::{run_simulation, SimConfig};

fn short_config(workers: usize) -> SimConfig {
    let scenario = ScenarioConfig {
        frames: 300,
        trials: 8,
        mean_active: 120.0,
        mean_inactive: 60.0,
        seed: 5,
        ..Default::default()
    };
    let bound = kappa_max_from_wng(8.7609, scenario.elements).unwrap();
    let mut cfg = SimConfig::new(scenario, vec![LoadingMode::Lanczos { k: 4 }], bound);
    cfg.workers = workers;
    cfg.scan_stride = 100;
    cfg
}

fn bench_mc(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        let cfg = short_config(1);
        b.iter(|| black_box(run_simulation(&cfg).unwrap()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel_all_cores", |b| {
        let cfg = short_config(0);
        b.iter(|| black_box(run_simulation(&cfg).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_mc);
criterion_main!(benches);
