//! Fine-tuning: cross-entropy minibatch training with AdamW, validation after
//! every epoch, and selection of the highest-validation-accuracy epoch.

mod adamw;

pub use adamw::AdamW;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleanExample, DatasetSplit};
use crate::metrics::{confusion, ConfusionMatrix, MetricsError};
use crate::model::{ClassifierModel, ModelError};
use crate::rng::{SeededRng, DEFAULT_SEED};
use crate::tokenizer::{encode, Encoding, Vocabulary};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training and validation sets must both be non-empty")]
    EmptySplit,
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("parameter {0} has no gradient")]
    MissingGradient(String),
    #[error("optimizer state does not match the parameters: {0}")]
    StateMismatch(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// lr 5e-5, β1 0.9, β2 0.999, no weight decay, five epochs.
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
            eps: 1e-8,
            epochs: 5,
            batch_size: 32,
            seed: DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    // The negated comparison also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr > 0.0) {
            return fail("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 || self.eps < 0.0 {
            return fail("weight_decay and eps must be non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_accuracy";

    pub fn csv_line(&self) -> String {
        format!("{},{:.6},{:.6}", self.epoch, self.train_loss, self.validation_accuracy)
    }
}

/// 1-based epoch with the highest validation accuracy, earliest on ties.
pub fn best_epoch(logs: &[EpochLog]) -> Option<usize> {
    let mut best: Option<&EpochLog> = None;
    for log in logs {
        if best.is_none_or(|b| log.validation_accuracy > b.validation_accuracy) {
            best = Some(log);
        }
    }
    best.map(|b| b.epoch)
}

pub struct TrainOutcome<T> {
    pub best_model: ClassifierModel<T>,
    pub best_epoch: usize,
    pub logs: Vec<EpochLog>,
    /// Parameters whose gradient was entirely zero over at least one epoch.
    pub zero_gradient_parameters: Vec<String>,
}

fn encode_all(examples: &[CleanExample], vocab: &Vocabulary, max_len: usize) -> Vec<Encoding> {
    examples.iter().map(|e| encode(&e.text, vocab, max_len)).collect()
}

/// Accuracy of `model` over pre-encoded examples.
fn accuracy_on<T: Scalar>(model: &ClassifierModel<T>, encodings: &[Encoding], labels: &[usize]) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    for chunk in encodings.chunks(64).zip(labels.chunks(64)) {
        let logits = model.forward(chunk.0)?;
        for (i, &label) in chunk.1.iter().enumerate() {
            let row = logits.row(i);
            let mut arg = 0;
            for k in 1..row.len() {
                if row[k] > row[arg] {
                    arg = k;
                }
            }
            correct += usize::from(arg == label);
        }
    }
    Ok(correct as f64 / encodings.len() as f64)
}

pub fn train<T: Scalar>(
    model: ClassifierModel<T>,
    split: &DatasetSplit,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    train_with(model, split, vocab, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` as each epoch's log entry is produced.
pub fn train_with<T: Scalar>(
    mut model: ClassifierModel<T>,
    split: &DatasetSplit,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<T>, TrainError> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let max_len = model.config.max_positions;
    let train_enc = encode_all(&split.train, vocab, max_len);
    let train_labels: Vec<usize> = split.train.iter().map(|e| e.label.index()).collect();
    let val_enc = encode_all(&split.validation, vocab, max_len);
    let val_labels: Vec<usize> = split.validation.iter().map(|e| e.label.index()).collect();

    let mut optimizer = AdamW::new(&model.parameters());
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ClassifierModel<T>)> = None;
    let mut zero_gradient: Vec<String> = Vec::new();

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut nonzero = vec![false; model.parameters().len()];
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Encoding> = idx.iter().map(|&i| train_enc[i].clone()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train_labels[i]).collect();
            model.zero_grad();
            let (loss, _) = model.loss_and_backward(&batch, &labels)?;
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    loss,
                });
            }
            for (seen, p) in nonzero.iter_mut().zip(model.parameters()) {
                *seen = *seen || p.grad.data().iter().any(|&g| g != T::zero());
            }
            optimizer.step(model.parameters_mut(), cfg)?;
            loss_sum += loss;
            batches += 1;
        }
        for (seen, p) in nonzero.iter().zip(model.parameters()) {
            if !seen && !zero_gradient.contains(&p.name) {
                log::warn!("parameter {} received an all-zero gradient during epoch {epoch}", p.name);
                zero_gradient.push(p.name.clone());
            }
        }

        let log = EpochLog {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_accuracy: accuracy_on(&model, &val_enc, &val_labels)?,
        };
        on_epoch(&log);
        if best.as_ref().is_none_or(|(acc, _, _)| log.validation_accuracy > *acc) {
            best = Some((log.validation_accuracy, epoch, model.clone()));
        }
        logs.push(log);
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best_model,
        best_epoch,
        logs,
        zero_gradient_parameters: zero_gradient,
    })
}

/// Accuracy (`Σ tp / N`) and confusion matrix of `model` on `examples`.
pub fn evaluate<T: Scalar>(
    model: &ClassifierModel<T>,
    examples: &[CleanExample],
    vocab: &Vocabulary,
) -> Result<(f64, ConfusionMatrix), TrainError> {
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        preds.push(model.predict(vocab, &ex.text)?.label);
    }
    let actuals: Vec<_> = examples.iter().map(|e| e.label).collect();
    let m = confusion(&preds, &actuals)?;
    Ok((m.sum_tp() as f64 / m.total() as f64, m))
}
