//! Training and evaluation behaviour on small synthetic problems.

use mipl_cdl::data::{generate_synthetic, split, GenConfig, MiplDataset};
use mipl_cdl::losses::LossKind;
use mipl_cdl::model::{AttentionKind, MiplModel};
use mipl_cdl::training::{evaluate, run_once, train, Evaluation, ModelSection, TrainConfig};

fn supervised_tiny() -> MiplDataset {
    generate_synthetic(&GenConfig {
        bags: 24,
        classes: 3,
        dim: 4,
        min_instances: 2,
        max_instances: 4,
        min_positive_fraction: 0.5,
        max_positive_fraction: 1.0,
        false_positives: 0,
        separation: 4.0,
        noise: 0.5,
        seed: 21,
    })
    .unwrap()
}

#[test]
fn supervised_degenerate_case_takes_a_descending_step() {
    let ds = supervised_tiny();
    assert!(ds.bags.iter().all(|b| b.candidates == vec![b.label]));
    let section = ModelSection {
        extractor: vec![8],
        scorer_hidden: 4,
        ..ModelSection::default()
    };
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: ds.len(),
        lr: 0.1,
        ..TrainConfig::default()
    };
    let mut model = MiplModel::new(section.build(ds.dim, ds.num_classes), 1).unwrap();
    let first = train(&ds, &mut model, &cfg).unwrap();
    assert_eq!(first.trace.batch_losses.len(), 1);
    let second = train(&ds, &mut model, &cfg).unwrap();
    let (a, b) = (first.trace.batch_losses[0], second.trace.batch_losses[0]);
    assert!(a.is_finite() && b.is_finite());
    assert!(b < a, "loss did not decrease: {a} -> {b}");
}

#[test]
fn same_seed_gives_identical_traces() {
    let ds = supervised_tiny();
    let section = ModelSection {
        extractor: vec![8],
        scorer_hidden: 4,
        attention: AttentionKind::Mam,
        ..ModelSection::default()
    };
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 5,
        seed: 17,
        ..TrainConfig::default()
    };
    let a = run_once(&ds, &section, &cfg, 0.7).unwrap();
    let b = run_once(&ds, &section, &cfg, 0.7).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.test.records, b.test.records);
}

#[test]
fn five_class_blobs_are_learned() {
    let ds = generate_synthetic(&GenConfig {
        bags: 500,
        classes: 5,
        dim: 8,
        min_instances: 10,
        max_instances: 20,
        min_positive_fraction: 0.2,
        max_positive_fraction: 0.4,
        false_positives: 1,
        separation: 4.0,
        noise: 1.0,
        seed: 5,
    })
    .unwrap();
    let section = ModelSection {
        extractor: vec![16],
        scorer_hidden: 8,
        attention: AttentionKind::Sam,
        ..ModelSection::default()
    };
    let cfg = TrainConfig {
        loss: LossKind::CdlCn,
        ..TrainConfig::default()
    };
    let res = run_once(&ds, &section, &cfg, 0.7).unwrap();
    assert_eq!(res.test.records.len(), 150);
    assert!(res.test.accuracy > 0.9, "accuracy {}", res.test.accuracy);
}

#[test]
fn oracle_predictions_are_perfectly_calibrated() {
    let ds = supervised_tiny();
    let records = ds
        .bags
        .iter()
        .map(|b| {
            let mut p = vec![0.0; ds.num_classes];
            p[b.label] = 1.0;
            mipl_cdl::calibration::PredictionRecord::new(b.id, p, b.label, b.candidates.clone()).unwrap()
        })
        .collect();
    let eval = Evaluation::from_records(records).unwrap();
    assert_eq!(eval.accuracy, 1.0);
    assert_eq!(eval.ece(), 0.0);
}

#[test]
fn zero_weight_model_is_uniform_and_calibrated() {
    let ds = generate_synthetic(&GenConfig {
        bags: 2000,
        classes: 4,
        dim: 3,
        min_instances: 1,
        max_instances: 3,
        min_positive_fraction: 0.5,
        max_positive_fraction: 1.0,
        ..GenConfig::default()
    })
    .unwrap();
    let (_, test) = split(&ds, 0.5, 3).unwrap();
    let section = ModelSection {
        extractor: vec![4],
        scorer_hidden: 2,
        ..ModelSection::default()
    };
    let mut model = MiplModel::new(section.build(ds.dim, ds.num_classes), 0).unwrap();
    for p in model.params_mut().iter_mut() {
        p.value.fill(0.0);
    }
    let eval = evaluate(&model, &test).unwrap();
    assert_eq!(eval.records.len(), test.len());
    for r in &eval.records {
        assert_eq!(r.predicted, 0);
        assert!((r.confidence - 0.25).abs() < 1e-15);
    }
    let label_one = test.bags.iter().filter(|b| b.label == 0).count() as f64 / test.len() as f64;
    assert!((eval.accuracy - label_one).abs() < 1e-12);
    assert!((eval.ece() - (label_one - 0.25).abs()).abs() < 1e-12);
    assert!(eval.ece() < 0.05, "ece {}", eval.ece());
}
