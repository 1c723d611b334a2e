//! Finite-difference checks for every layer, the end-to-end classifier and
//! the bag-of-n-grams baseline. Each suite draws random shapes and values,
//! compares the hand-written backward pass against central differences of a
//! random projection of the output, and reports the worst coordinate.

use issuebert::baseline::{BowConfig, BowModel};
use issuebert::model::{ClassifierModel, EncoderConfig};
use issuebert::nn::{
    gelu, gelu_backward, softmax_cross_entropy, softmax_cross_entropy_backward, tanh, tanh_backward, GeluKind,
    LayerNorm, Linear, MultiHeadAttention, Parameter, Tensor, LAYER_NORM_EPS,
};
use issuebert::rng::SeededRng;
use issuebert::tokenizer::Encoding;

use crate::fd::{numeric_gradient, project, worst, Checked, Measured, Worst};

pub const INSTANCES: usize = 20;

#[derive(Debug, Clone)]
pub struct Report {
    pub suite: &'static str,
    pub instance: usize,
    pub coords: usize,
    pub worst: Worst,
}

impl Report {
    pub fn passed<T: Checked>(&self) -> bool {
        self.worst.rel < T::TOLERANCE.max_rel
    }
}

fn random_tensor<T: Checked>(rng: &mut SeededRng, shape: &[usize], scale: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::of(rng.normal() * scale)).collect()).expect("non-empty shape")
}

fn randomize<T: Checked>(p: &mut Parameter<T>, rng: &mut SeededRng, scale: f64) {
    for v in p.value.data_mut() {
        *v = T::of(rng.normal() * scale);
    }
}

fn projection(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn as_tensor<T: Checked>(shape: &[usize], r: &[f64]) -> Tensor<T> {
    Tensor::from_vec(shape, r.iter().map(|&v| T::of(v)).collect()).expect("shape")
}

fn to_f64<T: Checked>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Compares `analytic` against finite differences over the tensors exposed
/// by `slots`.
fn compare<T: Checked, S: Clone>(
    suite: &'static str,
    instance: usize,
    state: &S,
    analytic: Vec<f64>,
    slots: impl Fn(&mut S) -> Vec<&mut [T]>,
    loss: impl Fn(&S) -> Measured,
) -> Report {
    let sizes: Vec<usize> = slots(&mut state.clone()).iter().map(|s| s.len()).collect();
    let locate = |mut i: usize| {
        for (k, &n) in sizes.iter().enumerate() {
            if i < n {
                return (k, i);
            }
            i -= n;
        }
        panic!("coordinate out of range")
    };
    let total: usize = sizes.iter().sum();
    assert_eq!(analytic.len(), total, "{suite}: analytic gradient length");
    let tol = T::TOLERANCE;
    let numeric = numeric_gradient(
        state,
        total,
        tol.delta,
        |s, i| {
            let (k, j) = locate(i);
            slots(&mut s.clone())[k][j]
        },
        |s, i, v| {
            let (k, j) = locate(i);
            slots(s)[k][j] = v;
        },
        loss,
    );
    Report {
        suite,
        instance,
        coords: total,
        worst: worst(&analytic, &numeric, &tol),
    }
}

/// Mean cross-entropy; its round-off follows the logit magnitudes.
fn ce_measured<T: Checked>(logits: &Tensor<T>, labels: &[usize]) -> Measured {
    let value = softmax_cross_entropy(logits, labels).unwrap().0.to_f64_lossy();
    let rows = labels.len() as f64;
    Measured {
        value,
        magnitude: value.abs() + logits.data().iter().map(|v| v.to_f64_lossy().abs()).sum::<f64>() / rows,
    }
}

pub fn linear<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let (b, i, o) = (1 + rng.below(4), 1 + rng.below(6), 1 + rng.below(6));
            let mut layer = Linear::new(Parameter::zeros("w", &[i, o]), Parameter::zeros("b", &[o]));
            randomize(&mut layer.weight, &mut rng, 0.5);
            randomize(&mut layer.bias, &mut rng, 0.5);
            let x = random_tensor::<T>(&mut rng, &[b, i], 1.0);
            let r = projection(&mut rng, b * o);
            let mut l2 = layer.clone();
            let dx = l2.backward(&x, &as_tensor(&[b, o], &r));
            let mut analytic = to_f64(l2.weight.grad.data());
            analytic.extend(to_f64(l2.bias.grad.data()));
            analytic.extend(to_f64(dx.data()));
            compare(
                "linear",
                inst,
                &(layer, x),
                analytic,
                |(l, x)| vec![l.weight.value.data_mut(), l.bias.value.data_mut(), x.data_mut()],
                |(l, x)| project(l.forward(x).unwrap().data(), &r),
            )
        })
        .collect()
}

pub fn layer_norm<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let (b, n) = (1 + rng.below(4), 2 + rng.below(7));
            let mut ln = LayerNorm::new("ln", n, LAYER_NORM_EPS);
            for v in ln.gamma.value.data_mut() {
                *v = T::of(1.0 + 0.3 * rng.normal());
            }
            randomize(&mut ln.beta, &mut rng, 0.3);
            let x = random_tensor::<T>(&mut rng, &[b, n], 1.0);
            let r = projection(&mut rng, b * n);
            let mut l2 = ln.clone();
            let (_, cache) = l2.forward(&x);
            let dx = l2.backward(&cache, &as_tensor(&[b, n], &r));
            let mut analytic = to_f64(l2.gamma.grad.data());
            analytic.extend(to_f64(l2.beta.grad.data()));
            analytic.extend(to_f64(dx.data()));
            compare(
                "layer_norm",
                inst,
                &(ln, x),
                analytic,
                |(l, x)| vec![l.gamma.value.data_mut(), l.beta.value.data_mut(), x.data_mut()],
                |(l, x)| project(l.forward(x).0.data(), &r),
            )
        })
        .collect()
}

fn elementwise<T: Checked>(
    suite: &'static str,
    seed: u64,
    forward: impl Fn(&Tensor<T>) -> Tensor<T>,
    backward: impl Fn(&Tensor<T>, &Tensor<T>, &Tensor<T>) -> Tensor<T>,
) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let (b, n) = (1 + rng.below(4), 1 + rng.below(8));
            let x = random_tensor::<T>(&mut rng, &[b, n], 1.5);
            let r = projection(&mut rng, b * n);
            let y = forward(&x);
            let dx = backward(&x, &y, &as_tensor(&[b, n], &r));
            compare(
                suite,
                inst,
                &x,
                to_f64(dx.data()),
                |x| vec![x.data_mut()],
                |x| project(forward(x).data(), &r),
            )
        })
        .collect()
}

pub fn gelu_erf<T: Checked>(seed: u64) -> Vec<Report> {
    elementwise::<T>(
        "gelu_erf",
        seed,
        |x| gelu(x, GeluKind::Erf),
        |x, _, dy| gelu_backward(x, dy, GeluKind::Erf),
    )
}

pub fn gelu_tanh<T: Checked>(seed: u64) -> Vec<Report> {
    elementwise::<T>(
        "gelu_tanh",
        seed,
        |x| gelu(x, GeluKind::Tanh),
        |x, _, dy| gelu_backward(x, dy, GeluKind::Tanh),
    )
}

pub fn tanh_layer<T: Checked>(seed: u64) -> Vec<Report> {
    elementwise::<T>("tanh", seed, tanh, |_, y, dy| tanh_backward(y, dy))
}

pub fn cross_entropy<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let (b, c) = (1 + rng.below(5), 2 + rng.below(4));
            let logits = random_tensor::<T>(&mut rng, &[b, c], 2.0);
            let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
            let (_, probs) = softmax_cross_entropy(&logits, &labels).unwrap();
            let d = softmax_cross_entropy_backward(&probs, &labels);
            compare(
                "cross_entropy",
                inst,
                &logits,
                to_f64(d.data()),
                |z| vec![z.data_mut()],
                |z| ce_measured(z, &labels),
            )
        })
        .collect()
}

pub fn attention<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let heads = 1 + rng.below(3);
            let hidden = heads * (1 + rng.below(3));
            let (b, s) = (1 + rng.below(2), 1 + rng.below(4));
            let mut attn = MultiHeadAttention::<T>::new("attn", hidden, heads).unwrap();
            for p in attn.parameters_mut() {
                randomize(p, &mut rng, 0.5);
            }
            let x = random_tensor::<T>(&mut rng, &[b, s, hidden], 1.0);
            // Every sequence keeps at least its first position.
            let mask: Vec<u8> = (0..b * s).map(|i| u8::from(i % s == 0 || rng.uniform() < 0.7)).collect();
            let r = projection(&mut rng, b * s * hidden);
            let mut a2 = attn.clone();
            let (_, cache) = a2.forward(&x, &mask).unwrap();
            let dx = a2.backward(&cache, &as_tensor(&[b, s, hidden], &r));
            let mut analytic: Vec<f64> = a2.parameters().iter().flat_map(|p| to_f64(p.grad.data())).collect();
            analytic.extend(to_f64(dx.data()));
            compare(
                "attention",
                inst,
                &(attn, x),
                analytic,
                |(a, x)| {
                    let mut v: Vec<&mut [T]> = a.parameters_mut().into_iter().map(|p| p.value.data_mut()).collect();
                    v.push(x.data_mut());
                    v
                },
                |(a, x)| project(a.forward(x, &mask).unwrap().0.data(), &r),
            )
        })
        .collect()
}

/// Linear → GELU → Linear → LayerNorm, checking that gradients compose.
pub fn composition<T: Checked>(seed: u64) -> Vec<Report> {
    type Stack<T> = (Linear<T>, Linear<T>, LayerNorm<T>, Tensor<T>);
    fn run<T: Checked>(s: &Stack<T>) -> Tensor<T> {
        let h = gelu(&s.0.forward(&s.3).unwrap(), GeluKind::Erf);
        s.2.forward(&s.1.forward(&h).unwrap()).0
    }
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let (b, i, m, o) = (1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(6), 2 + rng.below(5));
            let mut l1 = Linear::new(Parameter::zeros("l1.w", &[i, m]), Parameter::zeros("l1.b", &[m]));
            let mut l2 = Linear::new(Parameter::zeros("l2.w", &[m, o]), Parameter::zeros("l2.b", &[o]));
            for p in l1.parameters_mut().into_iter().chain(l2.parameters_mut()) {
                randomize(p, &mut rng, 0.7);
            }
            let ln = LayerNorm::new("ln", o, LAYER_NORM_EPS);
            let x = random_tensor::<T>(&mut rng, &[b, i], 1.0);
            let r = projection(&mut rng, b * o);
            let state: Stack<T> = (l1, l2, ln, x);

            let mut g = state.clone();
            let pre = g.0.forward(&g.3).unwrap();
            let h = gelu(&pre, GeluKind::Erf);
            let z = g.1.forward(&h).unwrap();
            let (_, cache) = g.2.forward(&z);
            let dz = g.2.backward(&cache, &as_tensor(&[b, o], &r));
            let dh = g.1.backward(&h, &dz);
            let dpre = gelu_backward(&pre, &dh, GeluKind::Erf);
            let dx = g.0.backward(&g.3, &dpre);
            let mut analytic: Vec<f64> = g
                .0
                .parameters()
                .iter()
                .chain(g.1.parameters().iter())
                .chain(g.2.parameters().iter())
                .flat_map(|p| to_f64(p.grad.data()))
                .collect();
            analytic.extend(to_f64(dx.data()));
            compare(
                "composition",
                inst,
                &state,
                analytic,
                |s| {
                    let (a, b, c, x) = s;
                    let mut v: Vec<&mut [T]> = a
                        .parameters_mut()
                        .into_iter()
                        .chain(b.parameters_mut())
                        .chain(c.parameters_mut())
                        .map(|p| p.value.data_mut())
                        .collect();
                    v.push(x.data_mut());
                    v
                },
                |s| project(run(s).data(), &r),
            )
        })
        .collect()
}

fn unpadded(ids: Vec<u32>) -> Encoding {
    let n = ids.len();
    Encoding {
        ids,
        attention_mask: vec![1; n],
        real_len: n,
    }
}

/// End-to-end: mean cross-entropy of a one-layer classifier (H=8, A=2) on a
/// small random batch, checked on every parameter coordinate.
pub fn end_to_end<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    (0..INSTANCES)
        .map(|inst| {
            let cfg = EncoderConfig {
                layers: 1,
                hidden: 8,
                heads: 2,
                ff_dim: 16,
                vocab_size: 12,
                max_positions: 8,
                num_labels: 3,
                gelu: GeluKind::Erf,
            };
            let mut model = ClassifierModel::<T>::init(cfg, rng.next_u64()).unwrap();
            // Larger weights than the 0.02 init so that every path carries
            // gradient well above round-off.
            for p in model.parameters_mut() {
                if !p.name.ends_with(".gamma") {
                    randomize(p, &mut rng, 0.3);
                }
            }
            let batch: Vec<Encoding> = (0..2)
                .map(|_| unpadded((0..2 + rng.below(5)).map(|_| rng.below(12) as u32).collect()))
                .collect();
            let labels: Vec<usize> = batch.iter().map(|_| rng.below(3)).collect();
            let mut g = model.clone();
            g.zero_grad();
            g.loss_and_backward(&batch, &labels).unwrap();
            let analytic: Vec<f64> = g.parameters().iter().flat_map(|p| to_f64(p.grad.data())).collect();
            compare(
                "end_to_end",
                inst,
                &model,
                analytic,
                |m| m.parameters_mut().into_iter().map(|p| p.value.data_mut()).collect(),
                |m| ce_measured(&m.forward(&batch).unwrap(), &labels),
            )
        })
        .collect()
}

/// Baseline loss for one example against its embedding rows, output weights and bias.
pub fn bag_of_ngrams<T: Checked>(seed: u64) -> Vec<Report> {
    let mut rng = SeededRng::new(seed);
    let words: Vec<String> = ["alpha", "beta", "gamma", "delta", "eps"].iter().map(|s| s.to_string()).collect();
    (0..INSTANCES)
        .map(|inst| {
            let cfg = BowConfig {
                embedding_dim: 1 + rng.below(6),
                bucket_count: 8,
                ..BowConfig::default()
            };
            let mut model = BowModel::<T>::zeros(cfg, words.clone()).unwrap();
            for p in model.parameters_mut() {
                randomize(p, &mut rng, 0.8);
            }
            let text: Vec<&str> = (0..1 + rng.below(6)).map(|_| words[rng.below(5)].as_str()).collect();
            let features = model.featurize(&text.join(" "));
            let label = rng.below(3);
            let grads = model.gradients(&features, label);
            let dim = model.config.embedding_dim;
            let mut dembed = vec![0.0; model.parameters()[0].len()];
            for (row, g) in &grads.embedding_rows {
                for (k, v) in g.iter().enumerate() {
                    dembed[row * dim + k] += v.to_f64_lossy();
                }
            }
            let mut analytic = dembed;
            analytic.extend(to_f64(&grads.output));
            analytic.extend(to_f64(&grads.bias));
            compare(
                "bag_of_ngrams",
                inst,
                &model,
                analytic,
                |m| m.parameters_mut().into_iter().map(|p| p.value.data_mut()).collect(),
                |m| {
                    let logits = m.bow_forward(&features);
                    Measured {
                        value: m.gradients(&features, label).loss.to_f64_lossy(),
                        magnitude: logits.iter().map(|v| v.to_f64_lossy().abs()).sum::<f64>(),
                    }
                },
            )
        })
        .collect()
}

/// Every layer suite plus the end-to-end model and the baseline, at precision `T`.
pub fn all<T: Checked>(seed: u64) -> Vec<Report> {
    let suites: [fn(u64) -> Vec<Report>; 10] = [
        linear::<T>,
        layer_norm::<T>,
        gelu_erf::<T>,
        gelu_tanh::<T>,
        tanh_layer::<T>,
        cross_entropy::<T>,
        attention::<T>,
        composition::<T>,
        end_to_end::<T>,
        bag_of_ngrams::<T>,
    ];
    suites
        .iter()
        .enumerate()
        .flat_map(|(k, f)| f(seed.wrapping_add(k as u64)))
        .collect()
}
