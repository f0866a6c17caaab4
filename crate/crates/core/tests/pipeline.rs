use aan_core::harness::data::{LabeledSet, TestSet};
use aan_core::harness::metrics::{analyze, evaluate_errors, Mode};
use aan_core::harness::report::Reporter;
use aan_core::harness::train::train;
use aan_core::net::{Aan, AanConfig, Feature};
use aan_core::reservoir::FeatureCache;
use aan_core::world::{ColorClass, DatasetKind, DatasetManifest, Image, ImageLabel};
use rand::Rng;

#[test]
fn dataset_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let m = DatasetManifest::generate(DatasetKind::NbylTest, 2).unwrap();
    m.write_to_dir(dir.path()).unwrap();
    let back = DatasetManifest::read_from_dir(dir.path()).unwrap();
    assert_eq!(back.kind, DatasetKind::NbylTest);
    assert_eq!(back.labels(), m.labels());
    for e in m.entries.iter().take(5) {
        let img = Image::read_png(&dir.path().join(&e.path)).unwrap();
        assert_eq!(img, e.label.spec.render().unwrap());
    }
}

const DIM: usize = 240;

/// Noisy features with one 60-channel block per visual attribute.
fn synthetic(labels: &[ImageLabel], salt: u64) -> LabeledSet {
    let mut rng = aan_core::seed::rng(salt, &[]);
    let rows = labels
        .iter()
        .map(|l| {
            let on = [l.is_big(), l.has_color(ColorClass::Yellow), l.is_left];
            (0..DIM)
                .map(|i| {
                    let block = i / 60;
                    let signal = block < 3 && on[block];
                    let base: f32 = if signal { 0.7 } else { 0.05 };
                    (base + rng.gen_range(-0.05..0.05f32)).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    LabeledSet::new(FeatureCache::from_rows(DIM, rows).unwrap(), labels.to_vec()).unwrap()
}

fn trained(seed: u64, train_set: &LabeledSet) -> Aan {
    let mut cfg = AanConfig {
        seed,
        ..AanConfig::default()
    };
    cfg.schedule.unsupervised_presentations = 3000;
    let mut aan = Aan::with_feature_dim(cfg, DIM).unwrap();
    train(&mut aan, train_set).unwrap();
    aan
}

#[test]
fn synthetic_features_train_save_and_report() {
    let train_labels = DatasetManifest::generate(DatasetKind::AanTrain, 3).unwrap().labels();
    let test_labels = DatasetManifest::generate(DatasetKind::BaselineTest, 3).unwrap().labels();
    let train_set = synthetic(&train_labels, 1);
    let baseline = synthetic(&test_labels, 2);

    let aan = trained(5, &train_set);
    let ff = evaluate_errors(&aan, &baseline, TestSet::Baseline, Mode::FeedForward).unwrap();
    for f in Feature::ALL {
        assert!(ff.get(f) < 5.0, "{f:?} feed-forward error {}", ff.get(f));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aan.bin");
    aan.save(&path).unwrap();
    let loaded = Aan::load(&path).unwrap();
    for i in 0..baseline.len() {
        let (a, b) = (aan.evaluate_with_feedback(baseline.row(i)), loaded.evaluate_with_feedback(baseline.row(i)));
        assert_eq!((a.run, a.pathway, a.triggers), (b.run, b.pathway, b.triggers));
    }

    // Same seed, same network, byte-identical report.
    let again = trained(5, &train_set);
    let csv = |net: &Aan, sub: &str| {
        let a = analyze(net, &baseline, TestSet::Baseline).unwrap();
        let out = dir.path().join(sub);
        Reporter::new(&out).unwrap().histograms(&[("baseline", a.histograms())]).unwrap();
        std::fs::read(out.join("fig4_histograms.csv")).unwrap()
    };
    assert_eq!(csv(&aan, "a"), csv(&again, "b"));
}
