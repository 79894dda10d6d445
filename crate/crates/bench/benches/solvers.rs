use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pathmeas::kernel::{fixed_point_iterate, measurable_ifs_measure, CylinderTable};
use pathmeas::measures::{check_consistency, check_ifs_fixed_point, PathSampler, Sampleable};
use pathmeas::spectral::perron_eigenpair;
use pathmeas::SolverConfig;
use pathmeas_bench::{complete, ifs, kernel, markov, tail, tridiagonal_z};

fn perron(c: &mut Criterion) {
    let mut group = c.benchmark_group("perron");
    for n in [4, 16, 64] {
        let a = complete(n).matrix(0).map(|x| x as f64).transpose();
        let cfg = SolverConfig::default();
        group.bench_with_input(BenchmarkId::new("complete", n), &a, |b, a| {
            b.iter(|| perron_eigenpair(black_box(a), &cfg).unwrap())
        });
    }
    let a = tridiagonal_z().matrix(0).map(|x| x as f64).transpose();
    for radius in [16, 64] {
        let cfg = SolverConfig::default().up_to_radius(radius);
        group.bench_with_input(BenchmarkId::new("tridiagonal_z", radius), &a, |b, a| {
            b.iter(|| perron_eigenpair(black_box(a), &cfg).unwrap())
        });
    }
    group.finish();
}

fn audits(c: &mut Criterion) {
    let m = tail(&complete(3));
    c.bench_function("consistency/tail_complete3_len5", |b| {
        b.iter(|| check_consistency(black_box(&m), 5, 1e-9))
    });
    let f = ifs(3);
    c.bench_function("ifs_fixed_point/complete3_len5", |b| {
        b.iter(|| check_ifs_fixed_point(black_box(&f), 5, 1e-12))
    });
}

fn sampling(c: &mut Criterion) {
    let m = markov(8);
    let mut group = c.benchmark_group("sample_markov");
    for len in [100, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, &len| {
            let mut sampler = PathSampler::new(7);
            b.iter(|| sampler.sample(Sampleable::Markov(&m), len).unwrap())
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let k = kernel(4);
    let m = measurable_ifs_measure(&k, vec![1.0; 4], 1e-12).unwrap();
    let start = CylinderTable::uniform(&m, 5).unwrap();
    c.bench_function("fixed_point_iterate/cells4_depth5", |b| {
        b.iter(|| fixed_point_iterate(black_box(&k), &start, 4).unwrap())
    });
}

criterion_group!(benches, perron, audits, sampling, kernels);
criterion_main!(benches);
