use super::{matmul, matmul_nt, matmul_tn, NnError, Parameter, Tensor};
use crate::Scalar;

pub struct AffineGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

fn check_affine<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
    let (b, n) = x.rows_cols();
    if w.shape().len() != 2 || w.shape()[0] != n || x.shape().len() != 2 {
        return Err(NnError::ShapeMismatch {
            op: "affine",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    let m = w.shape()[1];
    if bias.len() != m {
        return Err(NnError::ShapeMismatch {
            op: "affine bias",
            left: w.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    Ok((b, n, m))
}

/// `y[b,m] = x[b,n] · W[n,m] + bias[m]`
pub fn affine<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (b, n, m) = check_affine(x, w, bias)?;
    let mut y = matmul(x.data(), w.data(), b, n, m);
    for row in y.chunks_mut(m) {
        for (yj, &bj) in row.iter_mut().zip(bias.data()) {
            *yj += bj;
        }
    }
    Tensor::from_vec(&[b, m], y)
}

pub fn affine_backward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, dy: &Tensor<T>) -> AffineGrads<T> {
    let (b, n) = x.rows_cols();
    let m = w.shape()[1];
    debug_assert_eq!(dy.shape(), &[b, m]);
    let dx = matmul_nt(dy.data(), w.data(), b, m, n);
    let dw = matmul_tn(x.data(), dy.data(), b, n, m);
    let mut db = vec![T::zero(); m];
    for row in dy.data().chunks(m) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    AffineGrads {
        dx: Tensor::from_vec(&[b, n], dx).expect("dx shape"),
        dw,
        db,
    }
}

/// Dense layer owning its weight `[in, out]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(weight: Parameter<T>, bias: Parameter<T>) -> Self {
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        affine(x, &self.weight.value, &self.bias.value)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let g = affine_backward(x, &self.weight.value, dy);
        self.weight.accumulate(&g.dw);
        self.bias.accumulate(&g.db);
        g.dx
    }

    pub fn parameters(&self) -> [&Parameter<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn parameters_mut(&mut self) -> [&mut Parameter<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
