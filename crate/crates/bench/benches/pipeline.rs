use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use vandalstack::evaluation::{auc_roc, ScoredExample};
use vandalstack::featurize::extract;
use vandalstack::learners::{train, Family, ModelSpec};
use vandalstack::sampling::{sample_and_dedup, SamplingConfig};
use vandalstack::stacking::{fit_stack, StackConfig};
use vandalstack::workflow::{prediction_lines, train_pipeline, TrainSettings};
use vandalstack_bench::{corpus, encoded_matrix};

fn featurize(c: &mut Criterion) {
    let data = corpus(2000, 1);
    c.bench_function("extract 2000 revisions", |b| {
        b.iter(|| data.iter().map(|e| extract(black_box(&e.revision))).collect::<Vec<_>>())
    });
}

fn sampling(c: &mut Criterion) {
    let data = corpus(20_000, 2);
    let cfg = SamplingConfig::default();
    c.bench_function("sample and dedup 20000", |b| {
        b.iter(|| sample_and_dedup(black_box(data.clone()), &cfg).len())
    });
}

fn learners(c: &mut Criterion) {
    let enc = encoded_matrix(2000, 3);
    let mut group = c.benchmark_group("train 2000 rows");
    group.sample_size(10);
    for family in [
        Family::GradientBoosting,
        Family::ExtraTrees,
        Family::LogisticRegression,
        Family::Mlp,
    ] {
        let spec = ModelSpec::new(family);
        group.bench_function(family.name(), |b| {
            b.iter(|| train(&spec, black_box(&enc.rows), &enc.labels).unwrap())
        });
    }
    group.finish();
}

fn stacking(c: &mut Criterion) {
    let enc = encoded_matrix(1000, 4);
    let mut group = c.benchmark_group("stack");
    group.sample_size(10);
    group.bench_function("fit default stack on 1000 rows", |b| {
        b.iter(|| fit_stack(black_box(&enc.rows), &enc.labels, &StackConfig::default()).unwrap())
    });
    group.finish();
}

fn auc(c: &mut Criterion) {
    let scored: Vec<ScoredExample> = (0..100_000u64)
        .map(|i| ScoredExample::new(i, (i.wrapping_mul(2654435761) % 1000) as f64 / 1000.0, i % 7 == 0))
        .collect();
    c.bench_function("auc 100000", |b| b.iter(|| auc_roc(black_box(&scored)).unwrap()));
}

fn predict(c: &mut Criterion) {
    let data = corpus(10_000, 5);
    let pipeline = train_pipeline(data.clone(), &TrainSettings::standard()).unwrap().pipeline;
    let revisions: Vec<_> = data.iter().take(1000).map(|e| e.revision.clone()).collect();
    let mut group = c.benchmark_group("predict");
    group.sample_size(10);
    group.bench_function("score 1000 revisions", |b| {
        b.iter(|| prediction_lines(&pipeline, black_box(&revisions)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, featurize, sampling, learners, stacking, auc, predict);
criterion_main!(benches);
