//! `cargo bench -p casdet-bench` — preprocessing throughput and per-variant
//! inference latency at a reduced width (full-width numbers come from
//! `casdet benchmark`).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use casdet_bench::{probe_features, probe_recording};
use casdet_core::features::{extract, FeatureConfig};
use casdet_core::model::{build_model, ModelSpec, Variant};

fn preprocessing(c: &mut Criterion) {
    let recording = probe_recording(15.0);
    c.bench_function("extract_15s", |b| {
        b.iter(|| extract(black_box(&recording), &FeatureConfig::default()).unwrap())
    });
}

fn inference(c: &mut Criterion) {
    let features = probe_features(15.0);
    let mut group = c.benchmark_group("forward_quarter_width");
    group.sample_size(10);
    for variant in Variant::ALL {
        let spec = ModelSpec {
            gru_hidden: 32,
            width_scale: 0.25,
            ..ModelSpec::for_variant(variant)
        };
        let mut model = build_model(&spec, features.matrix.n_rows(), 0).unwrap();
        group.bench_function(BenchmarkId::from_parameter(variant.name()), |b| {
            b.iter(|| model.predict(black_box(&features.matrix)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, preprocessing, inference);
criterion_main!(benches);
