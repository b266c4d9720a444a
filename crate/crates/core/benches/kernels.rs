use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use weightlab_core::gen::{cascade, matrix_cascade, random_body_field, rng};
use weightlab_core::operators::{convex_maximal, hilbert_maximal};
use weightlab_core::par;
use weightlab_core::weights::{matrix_ap_roudenko, scalar_ap};
use weightlab_core::DyadicGrid;

fn both_paths(c: &mut Criterion, name: &str, run: impl Fn()) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("path", "parallel"), |b| b.iter(&run));
    group.bench_function(BenchmarkId::new("path", "sequential"), |b| b.iter(|| par::sequential(&run)));
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let g12 = DyadicGrid::new(1, 12).unwrap();
    let w = cascade(&g12, 1, 0.4);
    both_paths(c, "scalar_ap_depth12", || {
        scalar_ap(&w, 3.0).unwrap();
    });

    let g5 = DyadicGrid::new(1, 6).unwrap();
    let m = matrix_cascade(&g5, 2, 2, 0.4);
    both_paths(c, "roudenko_depth6", || {
        matrix_ap_roudenko(&m, 3.0).unwrap();
    });

    let g6 = DyadicGrid::new(2, 4).unwrap();
    let f = random_body_field(&g6, 2, &mut rng(3));
    both_paths(c, "convex_maximal_2d_depth4", || {
        convex_maximal(&f);
    });

    let g10 = DyadicGrid::new(1, 10).unwrap();
    let h = cascade(&g10, 4, 0.5);
    both_paths(c, "hilbert_maximal_depth10", || {
        hilbert_maximal(&h).unwrap();
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
