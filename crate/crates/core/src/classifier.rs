//! Model-agnostic prediction results and a loader that dispatches on the
//! checkpoint's model type.

use std::path::Path;

use serde::Serialize;

use crate::baseline::BowModel;
use crate::checkpoint::{self, CheckpointError, ModelKind};
use crate::corpus::{CleanExample, IssueLabel, NUM_CLASSES};
use crate::metrics::{confusion, ConfusionMatrix, MetricsError};
use crate::model::{ClassifierModel, ModelError};
use crate::tokenizer::Vocabulary;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: IssueLabel,
    pub probabilities: [f64; NUM_CLASSES],
}

impl Prediction {
    /// Arg-max with ties resolved toward the lowest class index.
    pub fn from_probabilities<T: Scalar>(p: &[T]) -> Self {
        let mut probabilities = [0.0; NUM_CLASSES];
        for (dst, &src) in probabilities.iter_mut().zip(p) {
            *dst = src.to_f64_lossy();
        }
        let mut best = 0;
        for i in 1..NUM_CLASSES {
            if probabilities[i] > probabilities[best] {
                best = i;
            }
        }
        Self {
            label: IssueLabel::from_index(best).expect("class index"),
            probabilities,
        }
    }

    /// `{"label": "...", "probabilities": {"bug": .., "enhancement": .., "question": ..}}`
    pub fn to_json(&self) -> serde_json::Value {
        let probs: serde_json::Map<String, serde_json::Value> = IssueLabel::ALL
            .iter()
            .map(|l| (l.to_string(), serde_json::json!(self.probabilities[l.index()])))
            .collect();
        serde_json::json!({ "label": self.label, "probabilities": probs })
    }
}

/// Either trained model, ready for inference.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Transformer {
        model: ClassifierModel<f32>,
        vocab: Vocabulary,
    },
    Baseline(BowModel<f32>),
}

impl LoadedModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let ckpt = checkpoint::read_file(path)?;
        match ckpt.manifest.model_type {
            ModelKind::Transformer => {
                let (model, vocab) = ClassifierModel::from_checkpoint(&ckpt)?;
                Ok(Self::Transformer { model, vocab })
            }
            ModelKind::Baseline => Ok(Self::Baseline(BowModel::from_checkpoint(&ckpt)?)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Transformer { .. } => ModelKind::Transformer,
            Self::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn predict(&self, text: &str) -> Result<Prediction, ModelError> {
        match self {
            Self::Transformer { model, vocab } => model.predict(vocab, text),
            Self::Baseline(m) => Ok(m.predict(text)),
        }
    }

    /// Accuracy and confusion matrix over labeled examples.
    pub fn evaluate(&self, examples: &[CleanExample]) -> Result<(f64, ConfusionMatrix), EvalError> {
        let mut preds = Vec::with_capacity(examples.len());
        for ex in examples {
            preds.push(self.predict(&ex.text)?.label);
        }
        let actuals: Vec<IssueLabel> = examples.iter().map(|e| e.label).collect();
        let m = confusion(&preds, &actuals)?;
        Ok((m.sum_tp() as f64 / m.total() as f64, m))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
