//! Plain nested-loop forward pass of the classifier in f64. It reads the
//! parameters by name and shares no code with the model's forward path.

use std::collections::HashMap;

use issuebert::model::EncoderConfig;
use issuebert::nn::GeluKind;
use issuebert::ClassifierModel64;

pub struct Weights {
    cfg: EncoderConfig,
    values: HashMap<String, Vec<f64>>,
}

impl Weights {
    pub fn from_model(model: &ClassifierModel64) -> Self {
        Self {
            cfg: model.config.clone(),
            values: model
                .parameters()
                .into_iter()
                .map(|p| (p.name.clone(), p.value.data().to_vec()))
                .collect(),
        }
    }

    fn get(&self, name: &str) -> &[f64] {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }
}

type Mat = Vec<Vec<f64>>;

/// `x · W + b` with `W` stored row-major as `[in, out]`.
fn dense(x: &Mat, w: &[f64], b: &[f64]) -> Mat {
    let out = b.len();
    let inp = w.len() / out;
    x.iter()
        .map(|row| {
            assert_eq!(row.len(), inp);
            (0..out)
                .map(|j| {
                    let mut acc = b[j];
                    for i in 0..inp {
                        acc += row[i] * w[i * out + j];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn layer_norm(x: &Mat, gamma: &[f64], beta: &[f64]) -> Mat {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = (var + 1e-12).sqrt();
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) / sd * gamma[j] + beta[j])
                .collect()
        })
        .collect()
}

fn gelu(x: f64, kind: GeluKind) -> f64 {
    match kind {
        GeluKind::Erf => 0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt())),
        GeluKind::Tanh => {
            let c = (2.0 / std::f64::consts::PI).sqrt();
            0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
        }
    }
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

/// Multi-head self-attention over one unpadded sequence.
fn attention(w: &Weights, prefix: &str, x: &Mat) -> Mat {
    let p = |n: &str| format!("{prefix}.{n}");
    let q = dense(x, w.get(&p("query.weight")), w.get(&p("query.bias")));
    let k = dense(x, w.get(&p("key.weight")), w.get(&p("key.bias")));
    let v = dense(x, w.get(&p("value.weight")), w.get(&p("value.bias")));
    let (s, h, heads) = (x.len(), w.cfg.hidden, w.cfg.heads);
    let d = h / heads;
    let mut ctx = vec![vec![0.0; h]; s];
    for head in 0..heads {
        for i in 0..s {
            let scores: Vec<f64> = (0..s)
                .map(|j| (0..d).map(|t| q[i][head * d + t] * k[j][head * d + t]).sum::<f64>() / (d as f64).sqrt())
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|z| (z - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for j in 0..s {
                for t in 0..d {
                    ctx[i][head * d + t] += e[j] / z * v[j][head * d + t];
                }
            }
        }
    }
    dense(&ctx, w.get(&p("output.weight")), w.get(&p("output.bias")))
}

/// Logits for the unpadded id sequence `ids`.
pub fn logits(w: &Weights, ids: &[u32]) -> Vec<f64> {
    let h = w.cfg.hidden;
    let tok = w.get("embeddings.token");
    let pos = w.get("embeddings.position");
    let emb: Mat = ids
        .iter()
        .enumerate()
        .map(|(p, &id)| (0..h).map(|j| tok[id as usize * h + j] + pos[p * h + j]).collect())
        .collect();
    let mut x = layer_norm(&emb, w.get("embeddings.norm.gamma"), w.get("embeddings.norm.beta"));
    for l in 0..w.cfg.layers {
        let p = |n: &str| format!("encoder.{l}.{n}");
        let a = attention(w, &p("attention"), &x);
        let h1 = layer_norm(&add(&x, &a), w.get(&p("attention_norm.gamma")), w.get(&p("attention_norm.beta")));
        let mut ff = dense(&h1, w.get(&p("intermediate.weight")), w.get(&p("intermediate.bias")));
        for row in &mut ff {
            for v in row.iter_mut() {
                *v = gelu(*v, w.cfg.gelu);
            }
        }
        let o = dense(&ff, w.get(&p("output.weight")), w.get(&p("output.bias")));
        x = layer_norm(&add(&h1, &o), w.get(&p("output_norm.gamma")), w.get(&p("output_norm.beta")));
    }
    let mut pooled = dense(&vec![x[0].clone()], w.get("pooler.weight"), w.get("pooler.bias"));
    for v in pooled[0].iter_mut() {
        *v = v.tanh();
    }
    dense(&pooled, w.get("classifier.weight"), w.get("classifier.bias")).remove(0)
}

/// Softmax in f64 with the max subtracted.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
