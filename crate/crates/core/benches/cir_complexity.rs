use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use synchro::balance::is_balanced_with;
use synchro::cir::cir;
use synchro::complexity::{self, Family, SLOPE_LIMIT};
use synchro::{fixtures, Execution, Partition};

/// Prints the operation-count sweep and fails on a super-cubic fit.
fn report() {
    let sizes = [64, 128, 256, 512, 1024];
    let reports: Vec<_> = [Family::Path, Family::DensePath].into_iter().map(|f| complexity::sweep(f, &sizes)).collect();
    print!("{}", complexity::render(&reports));
    for r in &reports {
        assert!(r.slope <= SLOPE_LIMIT, "{} grows super-cubically: slope {:.3}", r.family.name(), r.slope);
    }
}

fn cir_runs(c: &mut Criterion) {
    report();
    let mut group = c.benchmark_group("cir");
    group.sample_size(10);
    for n in [64, 128, 256] {
        let net = fixtures::dense_path(n);
        group.bench_with_input(BenchmarkId::new("dense_path", n), &net, |b, net| {
            b.iter(|| cir(black_box(net), &Partition::uniform(n)).unwrap())
        });
    }
    group.finish();
}

fn balance_modes(c: &mut Criterion) {
    let mut group = c.benchmark_group("is_balanced");
    let net = fixtures::dense_path(512);
    let part = Partition::uniform(512);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(BenchmarkId::new(name, "dense_path_512"), |b| {
            b.iter(|| is_balanced_with(black_box(&net), &part, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, cir_runs, balance_modes);
criterion_main!(benches);
