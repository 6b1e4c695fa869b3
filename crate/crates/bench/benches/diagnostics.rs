use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use soibart::spectral::DEFAULT_MAX_LAG;
use soibart::{acf, correlogram, fit_ar, periodogram, white_noise_check, SplitMask};
use soibart_bench::{ar_series, lag_dataset, soi_like};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("periodogram");
    for n in [704, 1604, 8192] {
        let series = ar_series(n, &[0.6], 11);
        group.bench_with_input(BenchmarkId::from_parameter(n), series.values(), |b, v| {
            b.iter(|| periodogram(black_box(v)).unwrap())
        });
    }
    group.finish();

    let series = soi_like();
    let v = series.values();
    c.bench_function("acf_36", |b| b.iter(|| acf(black_box(v), DEFAULT_MAX_LAG).unwrap()));
    c.bench_function("correlogram_36", |b| b.iter(|| correlogram(black_box(v), DEFAULT_MAX_LAG).unwrap()));
    c.bench_function("white_noise_check_36", |b| b.iter(|| white_noise_check(black_box(v), DEFAULT_MAX_LAG).unwrap()));
}

fn baseline(c: &mut Criterion) {
    let series = soi_like();
    let (_, data) = lag_dataset(&series, "1..9,41,73");
    let mask = SplitMask::all_train(data.n_rows());
    c.bench_function("fit_ar_11_lags", |b| b.iter(|| fit_ar(black_box(&data), &mask).unwrap()));
}

criterion_group!(benches, spectral, baseline);
criterion_main!(benches);
