use super::{Linear, NnError, Parameter, Tensor};
use crate::Scalar;

/// Additive score bias for masked key positions.
pub const MASK_BIAS: f64 = -1e9;

/// Scaled dot-product self-attention with `heads` heads over `[b, s, h]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention<T> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
    pub heads: usize,
}

pub struct AttentionCache<T> {
    batch: usize,
    seq: usize,
    x: Tensor<T>,
    q: Tensor<T>,
    k: Tensor<T>,
    v: Tensor<T>,
    /// `[b, heads, s, s]`
    probs: Vec<T>,
    context: Tensor<T>,
}

impl<T> AttentionCache<T> {
    /// Attention weights of `head` in batch item `b`, row-major `[s, s]`.
    pub fn probs(&self, b: usize, head: usize, heads: usize) -> &[T] {
        let ss = self.seq * self.seq;
        let start = (b * heads + head) * ss;
        &self.probs[start..start + ss]
    }
}

fn projection<T: Scalar>(prefix: &str, name: &str, hidden: usize) -> Linear<T> {
    Linear::new(
        Parameter::zeros(format!("{prefix}.{name}.weight"), &[hidden, hidden]),
        Parameter::zeros(format!("{prefix}.{name}.bias"), &[hidden]),
    )
}

impl<T: Scalar> MultiHeadAttention<T> {
    /// Zero-initialized projections named `{prefix}.{query,key,value,output}.{weight,bias}`.
    pub fn new(prefix: &str, hidden: usize, heads: usize) -> Result<Self, NnError> {
        if heads == 0 || !hidden.is_multiple_of(heads) {
            return Err(NnError::HeadsDivisibility { hidden, heads });
        }
        Ok(Self {
            query: projection(prefix, "query", hidden),
            key: projection(prefix, "key", hidden),
            value: projection(prefix, "value", hidden),
            output: projection(prefix, "output", hidden),
            heads,
        })
    }

    pub fn hidden(&self) -> usize {
        self.query.in_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.hidden() / self.heads
    }

    /// `x` is `[b, s, h]`; `mask` holds `b·s` entries, 0 marking padding keys.
    pub fn forward(&self, x: &Tensor<T>, mask: &[u8]) -> Result<(Tensor<T>, AttentionCache<T>), NnError> {
        let hidden = self.hidden();
        if x.shape().len() != 3 || x.shape()[2] != hidden {
            return Err(NnError::ShapeMismatch {
                op: "attention",
                left: x.shape().to_vec(),
                right: vec![hidden, hidden],
            });
        }
        let (batch, seq) = (x.shape()[0], x.shape()[1]);
        if mask.len() != batch * seq {
            return Err(NnError::MaskMismatch {
                expected: batch * seq,
                got: mask.len(),
            });
        }
        let x2 = x.clone().reshape(&[batch * seq, hidden])?;
        let q = self.query.forward(&x2)?;
        let k = self.key.forward(&x2)?;
        let v = self.value.forward(&x2)?;

        let (heads, d) = (self.heads, self.head_dim());
        let scale = T::one() / T::of(d as f64).sqrt();
        let bias = T::of(MASK_BIAS);
        let mut probs = vec![T::zero(); batch * heads * seq * seq];
        let mut context = Tensor::zeros(&[batch * seq, hidden]);
        let mut scores = vec![T::zero(); seq];
        for b in 0..batch {
            for h in 0..heads {
                let off = h * d;
                for i in 0..seq {
                    let qi = &q.row(b * seq + i)[off..off + d];
                    let mut max = T::neg_infinity();
                    for (j, s) in scores.iter_mut().enumerate() {
                        let kj = &k.row(b * seq + j)[off..off + d];
                        let mut dot = qi.iter().zip(kj).map(|(&a, &c)| a * c).sum::<T>() * scale;
                        if mask[b * seq + j] == 0 {
                            dot += bias;
                        }
                        *s = dot;
                        max = max.max(dot);
                    }
                    let mut sum = T::zero();
                    for s in scores.iter_mut() {
                        *s = (*s - max).exp();
                        sum += *s;
                    }
                    let prow = &mut probs[((b * heads + h) * seq + i) * seq..][..seq];
                    for (p, &s) in prow.iter_mut().zip(&scores) {
                        *p = s / sum;
                    }
                    let ctx = &mut context.row_mut(b * seq + i)[off..off + d];
                    for (j, &p) in prow.iter().enumerate() {
                        if p == T::zero() {
                            continue;
                        }
                        let vj = &v.row(b * seq + j)[off..off + d];
                        for (c, &vv) in ctx.iter_mut().zip(vj) {
                            *c += p * vv;
                        }
                    }
                }
            }
        }
        let out = self.output.forward(&context)?.reshape(&[batch, seq, hidden])?;
        Ok((
            out,
            AttentionCache {
                batch,
                seq,
                x: x2,
                q,
                k,
                v,
                probs,
                context,
            },
        ))
    }

    /// Accumulates projection gradients; returns `∂L/∂x` as `[b, s, h]`.
    pub fn backward(&mut self, cache: &AttentionCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (batch, seq, hidden) = (cache.batch, cache.seq, self.hidden());
        let (heads, d) = (self.heads, self.head_dim());
        let scale = T::one() / T::of(d as f64).sqrt();
        let dy2 = dy.clone().reshape(&[batch * seq, hidden]).expect("dy shape");
        let dctx = self.output.backward(&cache.context, &dy2);

        let mut dq = Tensor::zeros(&[batch * seq, hidden]);
        let mut dk = Tensor::zeros(&[batch * seq, hidden]);
        let mut dv = Tensor::zeros(&[batch * seq, hidden]);
        let mut dp = vec![T::zero(); seq];
        for b in 0..batch {
            for h in 0..heads {
                let off = h * d;
                for i in 0..seq {
                    let prow = &cache.probs[((b * heads + h) * seq + i) * seq..][..seq];
                    let gi = &dctx.row(b * seq + i)[off..off + d];
                    let mut weighted = T::zero();
                    for (j, (dpj, &p)) in dp.iter_mut().zip(prow).enumerate() {
                        let vj = &cache.v.row(b * seq + j)[off..off + d];
                        *dpj = gi.iter().zip(vj).map(|(&a, &c)| a * c).sum();
                        weighted += p * *dpj;
                        if p != T::zero() {
                            for (dvv, &g) in dv.row_mut(b * seq + j)[off..off + d].iter_mut().zip(gi) {
                                *dvv += p * g;
                            }
                        }
                    }
                    let qi: Vec<T> = cache.q.row(b * seq + i)[off..off + d].to_vec();
                    for (j, &p) in prow.iter().enumerate() {
                        let ds = p * (dp[j] - weighted) * scale;
                        if ds == T::zero() {
                            continue;
                        }
                        let kj = &cache.k.row(b * seq + j)[off..off + d];
                        for (dqq, &kk) in dq.row_mut(b * seq + i)[off..off + d].iter_mut().zip(kj) {
                            *dqq += ds * kk;
                        }
                        for (dkk, &qq) in dk.row_mut(b * seq + j)[off..off + d].iter_mut().zip(&qi) {
                            *dkk += ds * qq;
                        }
                    }
                }
            }
        }
        let mut dx = self.query.backward(&cache.x, &dq);
        dx.add_assign(&self.key.backward(&cache.x, &dk));
        dx.add_assign(&self.value.backward(&cache.x, &dv));
        dx.reshape(&[batch, seq, hidden]).expect("dx shape")
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        [&self.query, &self.key, &self.value, &self.output]
            .into_iter()
            .flat_map(|l| l.parameters())
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        [&mut self.query, &mut self.key, &mut self.value, &mut self.output]
            .into_iter()
            .flat_map(|l| l.parameters_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_attention(hidden: usize, heads: usize) -> MultiHeadAttention<f64> {
        let mut mha = MultiHeadAttention::new("attn", hidden, heads).unwrap();
        for p in mha.parameters_mut() {
            if p.shape().len() == 2 {
                for i in 0..hidden {
                    p.value.data_mut()[i * hidden + i] = 1.0;
                }
            }
        }
        mha
    }

    #[test]
    fn singleton_sequence_passes_through() {
        let mha = identity_attention(4, 2);
        let x = Tensor::from_vec(&[1, 1, 4], vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let (y, _) = mha.forward(&x, &[1]).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn identical_tokens_yield_shared_vector() {
        let mha = identity_attention(4, 2);
        let row = [0.3, -1.0, 2.0, 0.5];
        let x = Tensor::from_vec(&[1, 2, 4], [row, row].concat()).unwrap();
        let (y, _) = mha.forward(&x, &[1, 1]).unwrap();
        for (a, b) in y.data().iter().zip([row, row].concat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_unmasked_key_gets_all_weight() {
        let mha = identity_attention(4, 2);
        let x = Tensor::from_vec(&[1, 3, 4], vec![1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0, -5.0, 0.0, 5.0, 1.0]).unwrap();
        let (y, cache) = mha.forward(&x, &[1, 0, 0]).unwrap();
        for i in 0..3 {
            for (a, b) in y.row(0)[i * 4..(i + 1) * 4].iter().zip([1.0, 2.0, 3.0, 4.0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(cache.probs(0, 1, 2)[3], 1.0);
    }

    #[test]
    fn divisibility_is_checked() {
        assert_eq!(
            MultiHeadAttention::<f32>::new("a", 30, 4).unwrap_err(),
            NnError::HeadsDivisibility { hidden: 30, heads: 4 }
        );
    }

    #[test]
    fn mask_length_is_checked() {
        let mha = identity_attention(4, 2);
        let x = Tensor::zeros(&[1, 2, 4]);
        assert!(matches!(mha.forward(&x, &[1]), Err(NnError::MaskMismatch { expected: 2, got: 1 })));
    }
}
