//! fastText-style linear classifier: the mean of word and hashed-bigram
//! embeddings feeds a softmax over the three classes. Trained with plain
//! per-example SGD and a learning rate decaying linearly to zero.

use std::collections::HashMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Prediction;
use crate::corpus::{normalize, CleanExample, NUM_CLASSES};
use crate::nn::{Parameter, Tensor};
use crate::rng::{SeededRng, DEFAULT_SEED};
use crate::tokenizer::pre_tokenize;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("cannot train on an empty example list")]
    EmptyInput,
    #[error("invalid baseline config: {0}")]
    Config(String),
    #[error("model has no features: empty word list and bigrams disabled")]
    NoFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BowConfig {
    pub embedding_dim: usize,
    pub bucket_count: usize,
    pub lr_start: f64,
    pub epochs: usize,
    pub min_word_count: usize,
    pub seed: u64,
    pub bigrams: bool,
}

impl Default for BowConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 16,
            bucket_count: 1 << 18,
            lr_start: 0.1,
            epochs: 5,
            min_word_count: 1,
            seed: DEFAULT_SEED,
            bigrams: true,
        }
    }
}

impl BowConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let fail = |m: String| Err(BaselineError::Config(m));
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be at least 1".into());
        }
        if !self.bucket_count.is_power_of_two() {
            return fail(format!("bucket_count {} is not a power of two", self.bucket_count));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.lr_start >= 0.0 && self.lr_start.is_finite()) {
            return fail(format!("lr_start must be a non-negative number, got {}", self.lr_start));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a over `first`, a 0x20 separator byte, then `second`.
pub fn bigram_hash(first: &str, second: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(first.as_bytes());
    h.write(b" ");
    h.write(second.as_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BowModel<T> {
    pub config: BowConfig,
    words: Vec<String>,
    word_index: HashMap<String, u32>,
    /// Rows: one per word, then `bucket_count` bigram buckets when enabled.
    pub embeddings: Parameter<T>,
    /// `[embedding_dim, 3]`
    pub output: Parameter<T>,
    pub bias: Parameter<T>,
}

/// Sparse gradient of the loss for one example.
#[derive(Debug, Clone)]
pub struct BowGrads<T> {
    pub loss: T,
    /// One entry per feature occurrence.
    pub embedding_rows: Vec<(usize, Vec<T>)>,
    pub output: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> BowModel<T> {
    pub fn zeros(config: BowConfig, words: Vec<String>) -> Result<Self, BaselineError> {
        config.validate()?;
        let rows = words.len() + if config.bigrams { config.bucket_count } else { 0 };
        if rows == 0 {
            return Err(BaselineError::NoFeatures);
        }
        let word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let dim = config.embedding_dim;
        Ok(Self {
            embeddings: Parameter::zeros("embeddings", &[rows, dim]),
            output: Parameter::zeros("output.weight", &[dim, NUM_CLASSES]),
            bias: Parameter::zeros("output.bias", &[NUM_CLASSES]),
            config,
            words,
            word_index,
        })
    }

    /// Word embeddings uniform in `±1/dim`, output layer zero.
    pub fn init(config: BowConfig, words: Vec<String>) -> Result<Self, BaselineError> {
        let mut m = Self::zeros(config, words)?;
        let mut rng = SeededRng::new(m.config.seed);
        let bound = 1.0 / m.config.embedding_dim as f64;
        for v in m.embeddings.value.data_mut() {
            *v = T::of(rng.uniform_range(-bound, bound));
        }
        Ok(m)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        vec![&self.embeddings, &self.output, &self.bias]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.embeddings, &mut self.output, &mut self.bias]
    }

    /// Sorted feature ids: known unigrams plus, when enabled, one hashed bucket
    /// per adjacent word pair (unknown words included).
    pub fn featurize(&self, text: &str) -> Vec<usize> {
        let words = pre_tokenize(text);
        let mut ids: Vec<usize> = words
            .iter()
            .filter_map(|w| self.word_index.get(w).map(|&i| i as usize))
            .collect();
        if self.config.bigrams {
            let mask = self.config.bucket_count as u64 - 1;
            let offset = self.words.len();
            ids.extend(
                words
                    .windows(2)
                    .map(|p| offset + (bigram_hash(&p[0], &p[1]) & mask) as usize),
            );
        }
        ids.sort_unstable();
        ids
    }

    fn hidden(&self, features: &[usize]) -> Vec<T> {
        let dim = self.config.embedding_dim;
        let mut h = vec![T::zero(); dim];
        if features.is_empty() {
            return h;
        }
        for &f in features {
            for (a, &e) in h.iter_mut().zip(self.embeddings.value.row(f)) {
                *a += e;
            }
        }
        let n = T::of(features.len() as f64);
        h.iter_mut().for_each(|a| *a /= n);
        h
    }

    fn logits_from_hidden(&self, h: &[T]) -> [T; NUM_CLASSES] {
        let mut logits = [T::zero(); NUM_CLASSES];
        for (k, l) in logits.iter_mut().enumerate() {
            *l = self.bias.value.data()[k];
        }
        for (i, &hi) in h.iter().enumerate() {
            let row = self.output.value.row(i);
            for (l, &w) in logits.iter_mut().zip(row) {
                *l += hi * w;
            }
        }
        logits
    }

    /// Mean feature embedding (zero when there are no features) through the affine head.
    pub fn bow_forward(&self, features: &[usize]) -> [T; NUM_CLASSES] {
        self.logits_from_hidden(&self.hidden(features))
    }

    pub fn gradients(&self, features: &[usize], label: usize) -> BowGrads<T> {
        let h = self.hidden(features);
        let logits = self.logits_from_hidden(&h);
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        let loss = sum.ln() + max - logits[label];
        let mut dl: Vec<T> = exps.iter().map(|&e| e / sum).collect();
        dl[label] -= T::one();

        let dim = self.config.embedding_dim;
        let mut output = vec![T::zero(); dim * NUM_CLASSES];
        let mut dh = vec![T::zero(); dim];
        for i in 0..dim {
            let w = self.output.value.row(i);
            for k in 0..NUM_CLASSES {
                output[i * NUM_CLASSES + k] = h[i] * dl[k];
                dh[i] += w[k] * dl[k];
            }
        }
        let n = T::of(features.len().max(1) as f64);
        let row_grad: Vec<T> = dh.iter().map(|&g| g / n).collect();
        BowGrads {
            loss,
            embedding_rows: features.iter().map(|&f| (f, row_grad.clone())).collect(),
            output,
            bias: dl,
        }
    }

    /// Plain SGD step `θ ← θ − lr·g`.
    pub fn apply(&mut self, grads: &BowGrads<T>, lr: T) {
        for (row, g) in &grads.embedding_rows {
            for (v, &gi) in self.embeddings.value.row_mut(*row).iter_mut().zip(g) {
                *v -= lr * gi;
            }
        }
        for (v, &g) in self.output.value.data_mut().iter_mut().zip(&grads.output) {
            *v -= lr * g;
        }
        for (v, &g) in self.bias.value.data_mut().iter_mut().zip(&grads.bias) {
            *v -= lr * g;
        }
    }

    pub fn probabilities(&self, text: &str) -> [T; NUM_CLASSES] {
        let logits = self.bow_forward(&self.featurize(text));
        let t = Tensor::from_vec(&[1, NUM_CLASSES], logits.to_vec()).expect("logit shape");
        let p = crate::nn::softmax_rows(&t);
        let mut out = [T::zero(); NUM_CLASSES];
        out.copy_from_slice(p.data());
        out
    }

    pub fn predict(&self, text: &str) -> Prediction {
        Prediction::from_probabilities(&self.probabilities(&normalize(text)))
    }
}

/// Words seen at least `min_count` times, sorted.
pub fn word_list(examples: &[CleanExample], min_count: usize) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for ex in examples {
        for w in pre_tokenize(&ex.text) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut words: Vec<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .map(|(w, _)| w)
        .collect();
    words.sort_unstable();
    words
}

pub fn bow_train<T: Scalar>(examples: &[CleanExample], cfg: &BowConfig) -> Result<BowModel<T>, BaselineError> {
    bow_train_with(examples, cfg, |_, _, _| {})
}

/// Like [`bow_train`], calling `on_epoch(epoch, mean_loss, model)` after each
/// epoch (1-based).
pub fn bow_train_with<T: Scalar>(
    examples: &[CleanExample],
    cfg: &BowConfig,
    mut on_epoch: impl FnMut(usize, f64, &BowModel<T>),
) -> Result<BowModel<T>, BaselineError> {
    if examples.is_empty() {
        return Err(BaselineError::EmptyInput);
    }
    cfg.validate()?;
    let mut model: BowModel<T> = BowModel::init(cfg.clone(), word_list(examples, cfg.min_word_count))?;
    let features: Vec<Vec<usize>> = examples.iter().map(|e| model.featurize(&e.text)).collect();
    let total = (cfg.epochs * examples.len()) as f64;
    let mut rng = SeededRng::new(cfg.seed).fork();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for &i in &order {
            let lr = cfg.lr_start * (1.0 - step as f64 / total);
            let grads = model.gradients(&features[i], examples[i].label.index());
            loss_sum += grads.loss.to_f64_lossy();
            if lr > 0.0 {
                model.apply(&grads, T::of(lr));
            }
            step += 1;
        }
        on_epoch(epoch, loss_sum / examples.len() as f64, &model);
    }
    Ok(model)
}
