//! Same workloads on a one-thread pool and on the global pool. The results are
//! bit-identical; only the wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use chaoslab::harness::{build_model, run_study, RegisteredModel, StudyConfig};
use chaoslab::meanfield::{simulate_ips, Ensemble};
use chaoslab::sde::{NoiseDriver, SampleLaw, TimeGrid};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()),
    ]
}

fn study_config() -> StudyConfig {
    StudyConfig::from_toml(
        r#"
model_id = "bounded_kernel"
N_list = [16, 32, 64]
t_checkpoints = [0.5]
trials = 30
master_seed = 1

[grid]
T = 0.5
h = 0.02

[coupling]
kind = "shift"
c = 1.0
a = 0.5

[flow]
support = 500
"#,
    )
    .unwrap()
}

fn particle_system(c: &mut Criterion) {
    let cfg = study_config();
    let RegisteredModel::Finite(model) = build_model(&cfg).unwrap() else {
        unreachable!()
    };
    let grid = TimeGrid::with_step(1.0, 0.01).unwrap();
    let driver = NoiseDriver::new(1);
    let mut group = c.benchmark_group("simulate_ips");
    group.sample_size(10);
    for n in [256usize, 1024] {
        let init = Ensemble::sample(&SampleLaw::standard_normal(1), n, &driver, 0).unwrap();
        for (name, pool) in pools() {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| pool.install(|| simulate_ips(&model, &init, &grid, &driver, 0).unwrap()))
            });
        }
    }
    group.finish();
}

fn study(c: &mut Criterion) {
    let cfg = study_config();
    let mut group = c.benchmark_group("run_study");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| b.iter(|| pool.install(|| run_study(&cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, particle_system, study);
criterion_main!(benches);
