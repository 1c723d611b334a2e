//! Issue type prediction toolkit.
//!
//! Labeled GitHub issues are normalized ([`corpus`]), tokenized with WordPiece
//! ([`tokenizer`]) and classified as bug, enhancement or question by a small
//! BERT-style encoder with a `[CLS]` classification head ([`model`]) that is
//! fine-tuned with AdamW ([`train`]). [`metrics`] computes per-class recall,
//! precision and F-score plus the micro average, and [`baseline`] provides a
//! fastText-style bag-of-n-grams comparison model.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f32`
//! for normal use and `f64` for verification.

pub mod baseline;
pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod tokenizer;
pub mod train;

pub use scalar::Scalar;

pub type Tensor = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Parameter = nn::Parameter<f32>;
pub type Parameter64 = nn::Parameter<f64>;
pub type ClassifierModel = model::ClassifierModel<f32>;
pub type ClassifierModel64 = model::ClassifierModel<f64>;
pub type BowModel = baseline::BowModel<f32>;
pub type BowModel64 = baseline::BowModel<f64>;
pub type AdamW = train::AdamW<f32>;
pub type AdamW64 = train::AdamW<f64>;
