use std::hint::black_box;

use aan_core::harness::stats::pearson;
use aan_core::net::{Aan, AanConfig, Learning, NetworkState};
use aan_core::reservoir::{Architecture, Network, ReservoirModel, FEATURE_DIM};
use aan_core::seed;
use aan_core::world::{DatasetKind, DatasetManifest};
use criterion::{criterion_group, criterion_main, Criterion};

/// Deterministic sparse-ish features in [0, 1].
fn features(salt: usize) -> Vec<f32> {
    (0..FEATURE_DIM)
        .map(|i| {
            let h = (i * 2654435761 + salt * 40503) % 1000;
            if h < 700 {
                0.0
            } else {
                (h - 700) as f32 / 300.0
            }
        })
        .collect()
}

fn net(c: &mut Criterion) {
    let aan = Aan::new(AanConfig::default()).unwrap();
    let x = features(1);
    c.bench_function("aan forward", |b| b.iter(|| aan.forward_feedforward(black_box(&x))));
    c.bench_function("aan evaluate with feedback", |b| b.iter(|| aan.evaluate_with_feedback(black_box(&x))));
    let big3 = vec![1.0f32; 300];
    c.bench_function("feedback branch", |b| b.iter(|| aan.feedback_branch(black_box(&big3))));

    let label = DatasetManifest::generate(DatasetKind::NbylTest, 1).unwrap().labels()[0];
    let learning = Learning {
        reflex: true,
        associative: true,
    };
    let inputs: Vec<Vec<f32>> = (0..16).map(features).collect();
    c.bench_function("aan present", |b| {
        let mut aan = Aan::new(AanConfig::default()).unwrap();
        let mut state = NetworkState::default();
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % inputs.len();
            aan.present(&inputs[i], &label, learning, &mut state)
        })
    });
}

fn reservoir(c: &mut Criterion) {
    let mut rng = seed::rng(1, &[]);
    let model = ReservoirModel::new(Network::init(&Architecture::standard(), &mut rng).unwrap());
    let img = DatasetManifest::generate(DatasetKind::NbylTest, 1).unwrap().labels()[0]
        .spec
        .render()
        .unwrap();
    c.bench_function("reservoir forward", |b| b.iter(|| model.forward(black_box(&img)).unwrap()));
}

fn stats(c: &mut Criterion) {
    let (x, y) = (features(2), features(3));
    c.bench_function("pearson 4416", |b| b.iter(|| pearson(black_box(&x), black_box(&y)).unwrap()));
}

criterion_group!(benches, net, reservoir, stats);
criterion_main!(benches);
