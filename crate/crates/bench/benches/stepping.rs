use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};
use piston_core::sde::RandomStream;
use piston_core::sim::{run_trajectory, ModelKind};
use piston_core::{EngineParams, InitialCondition, SimConfig};

const STEPS: u64 = 10_000;

fn bench_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("stepping");
    group.throughput(Throughput::Elements(STEPS));

    group.bench_function("standard_normal", |b| {
        let mut rng = RandomStream::new(1, 0);
        b.iter(|| {
            let mut acc = 0.0;
            for _ in 0..STEPS {
                acc += rng.standard_normal();
            }
            black_box(acc)
        })
    });

    let reduced = SimConfig {
        params: EngineParams::fig3(),
        dt: 1e-3,
        t_end: STEPS as f64 * 1e-3,
        sample_stride: 1000,
    };
    let init = InitialCondition::fig3().to_state(ModelKind::Reduced, &reduced.params);
    group.bench_function("reduced_trajectory", |b| {
        b.iter(|| black_box(run_trajectory(&reduced, &init, 1, 0).unwrap()))
    });

    let full = reduced;
    let init = InitialCondition::fig3().to_state(ModelKind::Full, &full.params);
    group.bench_function("full_trajectory", |b| {
        b.iter(|| black_box(run_trajectory(&full, &init, 1, 0).unwrap()))
    });

    group.finish();
}

criterion_group!(benches, bench_steps);
criterion_main!(benches);
