//! Dense tensor math with hand-written forward and backward passes for the
//! layers the classifier needs.
//!
//! Every layer is a pair of functions: a forward pass that returns its output
//! plus whatever the backward pass needs, and a backward pass that maps an
//! upstream gradient to the input gradient while accumulating into the
//! layer's [`Parameter`] gradients. There is no tape; the model wires the
//! backward calls in reverse order itself.

mod activation;
mod attention;
mod linear;
mod loss;
mod norm;
mod param;
mod tensor;

pub use activation::{gelu, gelu_backward, gelu_scalar, tanh, tanh_backward, GeluKind};
pub use attention::{AttentionCache, MultiHeadAttention, MASK_BIAS};
pub use linear::{affine, affine_backward, AffineGrads, Linear};
pub use loss::{softmax_cross_entropy, softmax_cross_entropy_backward, softmax_rows};
pub use norm::{LayerNorm, LayerNormCache, LAYER_NORM_EPS};
pub use param::Parameter;
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?} for {len} elements")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("label {label} at batch index {index} is outside 0..{classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("hidden size {hidden} is not divisible by {heads} attention heads")]
    HeadsDivisibility { hidden: usize, heads: usize },
    #[error("attention mask has {got} entries, expected {expected}")]
    MaskMismatch { expected: usize, got: usize },
}
