use albench_bench::Pool;
use albench_core::classifiers::{committee, fit, ClassifierSpec};
use albench_core::datasets::generate_gaussian_clouds;
use albench_core::metrics::aubc_points;
use albench_core::strategies::{build_strategy, select_checked};
use albench_core::StrategyId;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn smo_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("svm_rbf_fit");
    for n in [100, 400] {
        let ds = generate_gaussian_clouds(true, n, 3).unwrap();
        let spec = ClassifierSpec::svm_rbf();
        g.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| fit(&spec, &ds.features, &ds.labels, ds.k_classes).unwrap())
        });
    }
    g.finish();
}

fn committee_fit(c: &mut Criterion) {
    let ds = generate_gaussian_clouds(false, 1000, 3).unwrap();
    let idx: Vec<usize> = (0..600).collect();
    let x = ds.features.select_rows(&idx);
    let y = &ds.labels[..600];
    let mut g = c.benchmark_group("committee_fit_600");
    for spec in committee() {
        g.bench_function(spec.kind.name(), |b| {
            b.iter(|| fit(&spec, &x, y, ds.k_classes).unwrap())
        });
    }
    g.finish();
}

fn strategy_select(c: &mut Criterion) {
    let pool = Pool::xor(600, 40, ClassifierSpec::svm_rbf());
    let mut g = c.benchmark_group("select");
    for name in ["uniform-1", "us", "qbc", "kcenter-1", "hier-5"] {
        let id: StrategyId = name.parse().unwrap();
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut s = build_strategy(&id).unwrap();
                select_checked(s.as_mut(), &pool.context(1)).unwrap()
            })
        });
    }
    g.finish();
}

fn aubc(c: &mut Criterion) {
    let points: Vec<(usize, f64)> = (20..520).map(|b| (b, 1.0 - 1.0 / b as f64)).collect();
    c.bench_function("aubc_500", |b| b.iter(|| aubc_points(black_box(&points)).unwrap()));
}

criterion_group!(benches, smo_fit, committee_fit, strategy_select, aubc);
criterion_main!(benches);
