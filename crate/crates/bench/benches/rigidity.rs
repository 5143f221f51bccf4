use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use formation_rigidity::{
    assemble_rigidity_matrix, classify, numerical_rank, validate_signed_henneberg, RankPolicy,
    RigidityKind,
};
use formation_rigidity_bench::chain;

fn bench_rank(c: &mut Criterion) {
    let policy = RankPolicy::default();
    let mut group = c.benchmark_group("assemble_and_rank");
    for n in [4usize, 8, 16, 32] {
        let fw = chain(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fw, |b, fw| {
            b.iter(|| {
                let m = assemble_rigidity_matrix(fw, RigidityKind::DistanceSign2D, 1.0).unwrap();
                numerical_rank(&m.rows, &policy)
            })
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let fw = chain(12);
    let policy = RankPolicy::default();
    c.bench_function("classify_n12", |b| {
        b.iter(|| classify(&fw, RigidityKind::DistanceSign2D, &policy).unwrap())
    });
}

fn bench_validate(c: &mut Criterion) {
    let fw = chain(12);
    c.bench_function("henneberg_validate_n12", |b| {
        b.iter(|| validate_signed_henneberg(&fw))
    });
}

criterion_group!(benches, bench_rank, bench_classify, bench_validate);
criterion_main!(benches);
