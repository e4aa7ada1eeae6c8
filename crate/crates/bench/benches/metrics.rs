use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use survbench::metrics::{antolini_c, auc_summary, brier_summary, harrell_c, DEFAULT_QUANTILES};
use survbench::synthetic::GeneratorKind;
use survbench_bench::{cox_fixture, dataset};

fn concordance(c: &mut Criterion) {
    let mut group = c.benchmark_group("concordance");
    for n in [500, 2000, 8000] {
        let d = dataset(GeneratorKind::NonPh, n, 1);
        let (pred, risks) = cox_fixture(&d);
        group.bench_with_input(BenchmarkId::new("harrell", n), &n, |b, _| b.iter(|| harrell_c(&risks, &d).unwrap()));
        group.bench_with_input(BenchmarkId::new("antolini", n), &n, |b, _| b.iter(|| antolini_c(&pred, &d).unwrap()));
    }
    group.finish();
}

fn ipcw(c: &mut Criterion) {
    let d = dataset(GeneratorKind::NonPh, 2000, 2);
    let (pred, _) = cox_fixture(&d);
    c.bench_function("brier_summary/2000", |b| b.iter(|| brier_summary(&pred, &d, &DEFAULT_QUANTILES).unwrap()));
    c.bench_function("auc_summary/2000", |b| b.iter(|| auc_summary(&pred, &d, &DEFAULT_QUANTILES).unwrap()));
}

criterion_group!(benches, concordance, ipcw);
criterion_main!(benches);
