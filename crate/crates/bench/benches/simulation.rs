use criterion::{criterion_group, criterion_main, Criterion};
use formation_rigidity::{
    control_velocity, perturbed_realization, simulate, ControllerKind, IntegratorSettings,
    SimulationConfig,
};
use formation_rigidity_bench::bipyramid;

fn bench_velocity(c: &mut Criterion) {
    let (fw, targets) = bipyramid();
    let start = fw.with_realization_unchecked(perturbed_realization(&fw, 0.05, 3));
    c.bench_function("control_velocity_3d", |b| {
        b.iter(|| control_velocity(&start, &targets, ControllerKind::DistanceSigned).unwrap())
    });
}

fn bench_steps(c: &mut Criterion) {
    let (fw, targets) = bipyramid();
    let config = SimulationConfig {
        framework: fw.with_realization_unchecked(perturbed_realization(&fw, 0.05, 3)),
        targets,
        controller: ControllerKind::DistanceSigned,
        integrator: IntegratorSettings {
            step: 1e-3,
            horizon: 0.1,
        },
        stop_tolerance: 1e-12,
    };
    c.bench_function("rk4_100_steps_3d", |b| b.iter(|| simulate(&config).unwrap()));
}

criterion_group!(benches, bench_velocity, bench_steps);
criterion_main!(benches);
