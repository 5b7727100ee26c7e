//! Sequential vs rayon on the batch entry points.
//!
//! `cargo bench -p flow2img-core` runs both; with `--no-default-features`
//! only the sequential path is compiled in.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use flow2img::ingest::read_dataset;
use flow2img::replica::Replica;
use flow2img::schema::{builtin_schema, LabelMode, LabelScheme};
use flow2img::stats::fit_with;
use flow2img::verify::verify;
use flow2img::{Codec, Dataset, LayoutSpec, Parallelism};

fn dataset(which: Replica, divisor: usize) -> Dataset {
    let mut csv = Vec::new();
    which
        .write_counts(&mut csv, &which.scaled_counts(divisor), 7)
        .unwrap();
    let schema = builtin_schema(which.dataset_id()).unwrap();
    let scheme = LabelScheme::builtin(which.dataset_id(), LabelMode::Binary).unwrap();
    read_dataset(
        csv.as_slice(),
        &schema,
        &scheme,
        which.split(),
        Parallelism::default(),
    )
    .unwrap()
}

fn batch(c: &mut Criterion) {
    let train = dataset(Replica::UnswTrain, 8);
    let schema = builtin_schema(Replica::UnswTrain.dataset_id()).unwrap();
    let stats = fit_with(&train, &schema, Parallelism::default()).unwrap();
    let codec = Codec::new(schema.clone(), stats, LayoutSpec::new(32).unwrap()).unwrap();

    let mut g = c.benchmark_group("batch");
    g.sample_size(10);
    g.throughput(Throughput::Elements(train.len() as u64));
    for &par in Parallelism::available() {
        g.bench_with_input(BenchmarkId::new("fit", par.name()), &par, |b, &par| {
            b.iter(|| fit_with(&train, &schema, par).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("encode", par.name()), &par, |b, &par| {
            b.iter(|| codec.encode_batch(&train.records, par))
        });
        g.bench_with_input(BenchmarkId::new("verify", par.name()), &par, |b, &par| {
            b.iter(|| verify(&codec, &train.records, par))
        });
    }
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
