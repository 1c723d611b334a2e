//! BERT-style sequence classifier: token and position embeddings, a stack of
//! post-layer-norm encoder blocks, a tanh pooler over the `[CLS]` state and a
//! linear head producing one logit per issue class.
//!
//! The pooler is a fully connected `H → H` layer; with `H = 1024` it is the
//! 1024-neuron layer sitting between the `[CLS]` output and the class
//! probabilities. Sequences are single-segment, so there is no token-type
//! embedding. Dropout is not used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Prediction;
use crate::corpus::{normalize, NUM_CLASSES};
use crate::nn::{
    gelu, gelu_backward, softmax_cross_entropy, softmax_cross_entropy_backward, softmax_rows, tanh,
    tanh_backward, AttentionCache, GeluKind, LayerNorm, LayerNormCache, Linear, MultiHeadAttention,
    NnError, Parameter, Tensor, LAYER_NORM_EPS,
};
use crate::rng::SeededRng;
use crate::tokenizer::{encode, Encoding, Vocabulary, MAX_LEN};
use crate::Scalar;

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("example {example}: token id {id} at position {position} is outside the vocabulary of {vocab_size}")]
    TokenOutOfRange {
        example: usize,
        position: usize,
        id: u32,
        vocab_size: usize,
    },
    #[error("example {example}: {len} tokens exceed the {max} available positions")]
    SequenceTooLong { example: usize, len: usize, max: usize },
    #[error("example {example}: empty sequence")]
    EmptySequence { example: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub vocab_size: usize,
    #[serde(default = "default_max_positions")]
    pub max_positions: usize,
    #[serde(default = "default_num_labels")]
    pub num_labels: usize,
    #[serde(default)]
    pub gelu: GeluKind,
}

fn default_max_positions() -> usize {
    MAX_LEN
}

fn default_num_labels() -> usize {
    NUM_CLASSES
}

impl EncoderConfig {
    /// Desk-scale encoder: 2 layers, hidden 32, 4 heads.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            layers: 2,
            hidden: 32,
            heads: 4,
            ff_dim: 128,
            vocab_size,
            max_positions: MAX_LEN,
            num_labels: NUM_CLASSES,
            gelu: GeluKind::Erf,
        }
    }

    /// BERT-large geometry (24 layers, hidden 1024, 16 heads).
    pub fn bert_large(vocab_size: usize) -> Self {
        Self {
            layers: 24,
            hidden: 1024,
            heads: 16,
            ff_dim: 4096,
            ..Self::tiny(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return fail(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            ));
        }
        if self.layers == 0 || self.ff_dim == 0 {
            return fail("layers and ff_dim must be positive".into());
        }
        if self.max_positions < 2 {
            return fail(format!("max_positions must be at least 2, got {}", self.max_positions));
        }
        if self.num_labels != NUM_CLASSES {
            return fail(format!("num_labels must be {NUM_CLASSES}, got {}", self.num_labels));
        }
        if self.vocab_size < 4 {
            return fail(format!("vocab_size {} cannot hold the special tokens", self.vocab_size));
        }
        Ok(())
    }

    /// Closed-form number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        let (h, f) = (self.hidden, self.ff_dim);
        let embeddings = self.vocab_size * h + self.max_positions * h + 2 * h;
        let block = 4 * (h * h + h) + 2 * h + (h * f + f) + (f * h + h) + 2 * h;
        let head = (h * h + h) + (h * self.num_labels + self.num_labels);
        embeddings + self.layers * block + head
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock<T> {
    pub attention: MultiHeadAttention<T>,
    pub attention_norm: LayerNorm<T>,
    pub intermediate: Linear<T>,
    pub output: Linear<T>,
    pub output_norm: LayerNorm<T>,
}

struct BlockCache<T> {
    attention: AttentionCache<T>,
    attention_norm: LayerNormCache<T>,
    h1: Tensor<T>,
    ff_pre: Tensor<T>,
    ff_act: Tensor<T>,
    output_norm: LayerNormCache<T>,
}

fn linear<T: Scalar>(name: &str, inp: usize, out: usize) -> Linear<T> {
    Linear::new(
        Parameter::zeros(format!("{name}.weight"), &[inp, out]),
        Parameter::zeros(format!("{name}.bias"), &[out]),
    )
}

impl<T: Scalar> EncoderBlock<T> {
    fn new(prefix: &str, cfg: &EncoderConfig) -> Result<Self, ModelError> {
        Ok(Self {
            attention: MultiHeadAttention::new(&format!("{prefix}.attention"), cfg.hidden, cfg.heads)?,
            attention_norm: LayerNorm::new(&format!("{prefix}.attention_norm"), cfg.hidden, LAYER_NORM_EPS),
            intermediate: linear(&format!("{prefix}.intermediate"), cfg.hidden, cfg.ff_dim),
            output: linear(&format!("{prefix}.output"), cfg.ff_dim, cfg.hidden),
            output_norm: LayerNorm::new(&format!("{prefix}.output_norm"), cfg.hidden, LAYER_NORM_EPS),
        })
    }

    fn forward(&self, x: &Tensor<T>, gelu_kind: GeluKind) -> Result<(Tensor<T>, BlockCache<T>), ModelError> {
        let (s, h) = x.rows_cols();
        let x3 = x.clone().reshape(&[1, s, h])?;
        let (a, attention) = self.attention.forward(&x3, &vec![1u8; s])?;
        let r1 = x.add(&a.reshape(&[s, h])?)?;
        let (h1, attention_norm) = self.attention_norm.forward(&r1);
        let ff_pre = self.intermediate.forward(&h1)?;
        let ff_act = gelu(&ff_pre, gelu_kind);
        let r2 = h1.add(&self.output.forward(&ff_act)?)?;
        let (y, output_norm) = self.output_norm.forward(&r2);
        Ok((
            y,
            BlockCache {
                attention,
                attention_norm,
                h1,
                ff_pre,
                ff_act,
                output_norm,
            },
        ))
    }

    fn backward(&mut self, cache: &BlockCache<T>, dy: &Tensor<T>, gelu_kind: GeluKind) -> Tensor<T> {
        let (s, h) = dy.rows_cols();
        let dr2 = self.output_norm.backward(&cache.output_norm, dy);
        let dact = self.output.backward(&cache.ff_act, &dr2);
        let dpre = gelu_backward(&cache.ff_pre, &dact, gelu_kind);
        let mut dh1 = dr2;
        dh1.add_assign(&self.intermediate.backward(&cache.h1, &dpre));
        let dr1 = self.attention_norm.backward(&cache.attention_norm, &dh1);
        let dr1_3 = dr1.clone().reshape(&[1, s, h]).expect("shape");
        let dattn = self.attention.backward(&cache.attention, &dr1_3);
        let mut dx = dr1;
        dx.add_assign(&dattn.reshape(&[s, h]).expect("shape"));
        dx
    }

    fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut p = self.attention.parameters();
        p.extend(self.attention_norm.parameters());
        p.extend(self.intermediate.parameters());
        p.extend(self.output.parameters());
        p.extend(self.output_norm.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut p = self.attention.parameters_mut();
        p.extend(self.attention_norm.parameters_mut());
        p.extend(self.intermediate.parameters_mut());
        p.extend(self.output.parameters_mut());
        p.extend(self.output_norm.parameters_mut());
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel<T> {
    pub config: EncoderConfig,
    pub token_embedding: Parameter<T>,
    pub position_embedding: Parameter<T>,
    pub embedding_norm: LayerNorm<T>,
    pub blocks: Vec<EncoderBlock<T>>,
    pub pooler: Linear<T>,
    pub classifier: Linear<T>,
}

/// Intermediate values of one example's forward pass.
pub struct ForwardCache<T> {
    ids: Vec<u32>,
    embedding_norm: LayerNormCache<T>,
    blocks: Vec<BlockCache<T>>,
    cls: Tensor<T>,
    pooled: Tensor<T>,
}

impl<T> ForwardCache<T> {
    pub fn seq_len(&self) -> usize {
        self.ids.len()
    }
}

impl<T: Scalar> ClassifierModel<T> {
    /// All-zero parameters with the given geometry.
    pub fn zeros(config: EncoderConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let h = config.hidden;
        let blocks = (0..config.layers)
            .map(|i| EncoderBlock::new(&format!("encoder.{i}"), &config))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            token_embedding: Parameter::zeros("embeddings.token", &[config.vocab_size, h]),
            position_embedding: Parameter::zeros("embeddings.position", &[config.max_positions, h]),
            embedding_norm: LayerNorm::new("embeddings.norm", h, LAYER_NORM_EPS),
            blocks,
            pooler: linear("pooler", h, h),
            classifier: linear("classifier", h, config.num_labels),
            config,
        })
    }

    /// Weights ~ N(0, 0.02²) truncated at ±2σ; biases and betas 0; gammas 1.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        let mut model = Self::zeros(config)?;
        let mut rng = SeededRng::new(seed);
        for p in model.parameters_mut() {
            if p.name.ends_with(".gamma") || p.name.ends_with(".beta") || p.name.ends_with(".bias") {
                continue;
            }
            for v in p.value.data_mut() {
                *v = T::of(rng.truncated_normal(INIT_STD));
            }
        }
        Ok(model)
    }

    /// Flat registry in a fixed order; names are unique.
    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        let mut p = vec![&self.token_embedding, &self.position_embedding];
        p.extend(self.embedding_norm.parameters());
        for b in &self.blocks {
            p.extend(b.parameters());
        }
        p.extend(self.pooler.parameters());
        p.extend(self.classifier.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut p = vec![&mut self.token_embedding, &mut self.position_embedding];
        p.extend(self.embedding_norm.parameters_mut());
        for b in &mut self.blocks {
            p.extend(b.parameters_mut());
        }
        p.extend(self.pooler.parameters_mut());
        p.extend(self.classifier.parameters_mut());
        p
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn check_encoding(&self, example: usize, enc: &Encoding) -> Result<(), ModelError> {
        if enc.real_len == 0 {
            return Err(ModelError::EmptySequence { example });
        }
        if enc.real_len > self.config.max_positions {
            return Err(ModelError::SequenceTooLong {
                example,
                len: enc.real_len,
                max: self.config.max_positions,
            });
        }
        if let Some((position, &id)) = enc
            .ids
            .iter()
            .enumerate()
            .find(|(_, &id)| id as usize >= self.config.vocab_size)
        {
            return Err(ModelError::TokenOutOfRange {
                example,
                position,
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Logits for one unpadded id sequence, plus what backward needs.
    pub fn forward_ids(&self, ids: &[u32]) -> Result<(Vec<T>, ForwardCache<T>), ModelError> {
        let (s, h) = (ids.len(), self.config.hidden);
        let mut emb = Tensor::zeros(&[s, h]);
        for (p, &id) in ids.iter().enumerate() {
            let tok = self.token_embedding.value.row(id as usize);
            let pos = self.position_embedding.value.row(p);
            for ((e, &a), &b) in emb.row_mut(p).iter_mut().zip(tok).zip(pos) {
                *e = a + b;
            }
        }
        let (mut x, embedding_norm) = self.embedding_norm.forward(&emb);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(&x, self.config.gelu)?;
            blocks.push(cache);
            x = y;
        }
        let cls = Tensor::from_vec(&[1, h], x.row(0).to_vec())?;
        let pooled = tanh(&self.pooler.forward(&cls)?);
        let logits = self.classifier.forward(&pooled)?;
        Ok((
            logits.into_data(),
            ForwardCache {
                ids: ids.to_vec(),
                embedding_norm,
                blocks,
                cls,
                pooled,
            },
        ))
    }

    /// Accumulates gradients of every parameter given `∂L/∂logits` for one example.
    pub fn backward_ids(&mut self, cache: &ForwardCache<T>, dlogits: &[T]) {
        let (s, h) = (cache.ids.len(), self.config.hidden);
        let dl = Tensor::from_vec(&[1, self.config.num_labels], dlogits.to_vec()).expect("logit grad");
        let dpooled = self.classifier.backward(&cache.pooled, &dl);
        let dpre = tanh_backward(&cache.pooled, &dpooled);
        let dcls = self.pooler.backward(&cache.cls, &dpre);
        let mut dx = Tensor::zeros(&[s, h]);
        dx.row_mut(0).copy_from_slice(dcls.data());
        let gelu_kind = self.config.gelu;
        for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dx = block.backward(bc, &dx, gelu_kind);
        }
        let demb = self.embedding_norm.backward(&cache.embedding_norm, &dx);
        for (p, &id) in cache.ids.iter().enumerate() {
            self.token_embedding.accumulate_row(id as usize, demb.row(p));
            self.position_embedding.accumulate_row(p, demb.row(p));
        }
    }

    /// Logits `[b, num_labels]`. Only positions with attention mask 1 are read.
    pub fn forward(&self, batch: &[Encoding]) -> Result<Tensor<T>, ModelError> {
        let mut out = Vec::with_capacity(batch.len() * self.config.num_labels);
        for (i, enc) in batch.iter().enumerate() {
            self.check_encoding(i, enc)?;
            out.extend(self.forward_ids(enc.real_ids())?.0);
        }
        Ok(Tensor::from_vec(&[batch.len(), self.config.num_labels], out)?)
    }

    /// Mean cross-entropy over the batch; gradients are accumulated into the
    /// parameters (call [`ClassifierModel::zero_grad`] first).
    pub fn loss_and_backward(&mut self, batch: &[Encoding], labels: &[usize]) -> Result<(T, Tensor<T>), ModelError> {
        let mut logits = Vec::with_capacity(batch.len() * self.config.num_labels);
        let mut caches = Vec::with_capacity(batch.len());
        for (i, enc) in batch.iter().enumerate() {
            self.check_encoding(i, enc)?;
            let (l, c) = self.forward_ids(enc.real_ids())?;
            logits.extend(l);
            caches.push(c);
        }
        let logits = Tensor::from_vec(&[batch.len(), self.config.num_labels], logits)?;
        let (loss, probs) = softmax_cross_entropy(&logits, labels)?;
        let dlogits = softmax_cross_entropy_backward(&probs, labels);
        for (i, cache) in caches.iter().enumerate() {
            self.backward_ids(cache, dlogits.row(i));
        }
        Ok((loss, probs))
    }

    /// Normalizes and encodes `text`, then returns class probabilities and the arg-max label.
    pub fn predict(&self, vocab: &Vocabulary, text: &str) -> Result<Prediction, ModelError> {
        let enc = encode(&normalize(text), vocab, self.config.max_positions);
        let logits = self.forward(std::slice::from_ref(&enc))?;
        let probs = softmax_rows(&logits);
        Ok(Prediction::from_probabilities(probs.row(0)))
    }
}
