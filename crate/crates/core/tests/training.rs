use issuebert::baseline::{bow_train, BowConfig};
use issuebert::corpus::{CleanExample, DatasetSplit};
use issuebert::model::{ClassifierModel, EncoderConfig};
use issuebert::tokenizer::{build_vocab, encode, Vocabulary};
use issuebert::train::{evaluate, train, TrainConfig};
use issuebert::ClassifierModel as Model32;
use issuebert_testkit::synth;

fn split_of(examples: Vec<CleanExample>) -> DatasetSplit {
    DatasetSplit {
        train: examples.clone(),
        validation: examples,
        seed: 0,
        fraction: 1.0,
    }
}

fn tiny(vocab: &Vocabulary) -> EncoderConfig {
    EncoderConfig {
        max_positions: 32,
        ..EncoderConfig::tiny(vocab.len())
    }
}

#[test]
fn loss_strictly_decreases_on_a_fixed_batch() {
    let examples = synth::separable(4, 9);
    let vocab = build_vocab(&examples, 60).unwrap();
    let batch: Vec<_> = examples.iter().map(|e| encode(&e.text, &vocab, 32)).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label.index()).collect();
    let cfg = TrainConfig {
        lr: 1e-3,
        ..TrainConfig::default()
    };
    for seed in 0..5 {
        let mut model = Model32::init(tiny(&vocab), seed).unwrap();
        let mut opt = issuebert::AdamW::new(&model.parameters());
        let mut losses = Vec::new();
        for _ in 0..5 {
            model.zero_grad();
            let (loss, _) = model.loss_and_backward(&batch, &labels).unwrap();
            losses.push(loss);
            opt.step(model.parameters_mut(), &cfg).unwrap();
        }
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {losses:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let examples = synth::separable(24, 4);
    let vocab = build_vocab(&examples, 80).unwrap();
    let split = split_of(examples);
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 3,
        batch_size: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let model = ClassifierModel::<f32>::init(tiny(&vocab), 1).unwrap();
        let out = train(model, &split, &vocab, &cfg).unwrap();
        (out.best_model.to_checkpoint_bytes(&vocab), out.logs)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(la, lb);
    assert!(a == b, "checkpoint bytes differ");
}

#[test]
fn tiny_transformer_overfits_separable_data() {
    let examples = synth::separable(32, 17);
    let vocab = build_vocab(&examples, 200).unwrap();
    assert!(vocab.len() <= 200);
    let split = split_of(examples.clone());
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 200,
        ..TrainConfig::default()
    };
    let model = Model32::init(tiny(&vocab), 42).unwrap();
    let out = train(model, &split, &vocab, &cfg).unwrap();
    let first = out.logs.iter().find(|l| l.validation_accuracy == 1.0).map(|l| l.epoch);
    println!("transformer reached 100% at epoch {first:?}");
    let (acc, _) = evaluate(&out.best_model, &examples, &vocab).unwrap();
    assert_eq!(acc, 1.0);
    assert!(out.zero_gradient_parameters.is_empty(), "{:?}", out.zero_gradient_parameters);
}

/// Small-data settings: with the defaults (lr 0.1, 5 epochs) 32 examples give
/// only 160 updates, too few to leave the zero-initialized output layer.
fn small_data_bow() -> BowConfig {
    BowConfig {
        lr_start: 1.0,
        epochs: 25,
        ..BowConfig::default()
    }
}

#[test]
fn baseline_overfits_separable_data() {
    for seed in [17, 1, 2] {
        let examples = synth::separable(32, seed);
        let bow = bow_train::<f32>(&examples, &small_data_bow()).unwrap();
        let correct = examples.iter().filter(|e| bow.predict(&e.text).label == e.label).count();
        assert_eq!(correct, examples.len(), "seed {seed}");
    }
}

#[test]
fn baseline_training_is_deterministic() {
    let examples = synth::separable(32, 3);
    let a = bow_train::<f32>(&examples, &BowConfig::default()).unwrap();
    let b = bow_train::<f32>(&examples, &BowConfig::default()).unwrap();
    assert!(a.to_checkpoint_bytes() == b.to_checkpoint_bytes());
}
