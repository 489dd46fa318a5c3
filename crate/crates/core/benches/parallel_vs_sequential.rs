use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use qtomo::encoding::EncodingSpec;
use qtomo::par::{single_threaded, workers};
use qtomo::phantom::{generate_shepp_logan, PhantomMode};
use qtomo::projector::{radon, Geometry, Projector};
use qtomo::qubo::build_region_qubo_with;
use qtomo::solver::{solve_sa, AnnealParams};
use qtomo::{Image, Region};

fn pools(c: &mut Criterion, name: &str, mut f: impl FnMut() + Send) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("pool", workers()), |b| b.iter(&mut f));
    group.bench_function(BenchmarkId::new("sequential", 1), |b| single_threaded(|| b.iter(&mut f)));
    group.finish();
}

fn benches(c: &mut Criterion) {
    let img = generate_shepp_logan(64, PhantomMode::IntegerLevels(4)).unwrap();
    let g = Geometry::uniform(64, 64).unwrap();
    pools(c, "radon_64", || {
        black_box(radon(&img, &g).unwrap());
    });

    let projector = Projector::new(&g);
    let sino = projector.forward(&img).unwrap();
    let current = Image::zeros(64, 64);
    let region = Region::new(16, 16, 32, 32);
    let encoding = EncodingSpec::Radix2 { bits: 2 };
    pools(c, "qubo_build_32x32_region", || {
        black_box(build_region_qubo_with(&projector, &current, &region, &sino, &encoding).unwrap());
    });

    let small = Region::new(24, 24, 16, 16);
    let problem = build_region_qubo_with(&projector, &current, &small, &sino, &encoding).unwrap();
    let params = AnnealParams { sweeps: 200, restarts: 8, beta_min: 0.1, beta_max: 10.0, seed: 1 };
    pools(c, "sa_512_vars_8_restarts", || {
        black_box(solve_sa(&problem, &params).unwrap());
    });
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
