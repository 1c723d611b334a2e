use super::{TrainConfig, TrainError};
use crate::nn::{Parameter, Tensor};
use crate::Scalar;

/// AdamW moment estimates, one `m`/`v` pair per parameter in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW<T> {
    names: Vec<String>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &[&Parameter<T>]) -> Self {
        Self {
            names: params.iter().map(|p| p.name.clone()).collect(),
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, i: usize) -> &Tensor<T> {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor<T> {
        &self.v[i]
    }

    /// One update of every parameter:
    ///
    /// ```text
    /// m ← β1·m + (1−β1)·g          v ← β2·v + (1−β2)·g²
    /// m̂ = m / (1−β1^t)             v̂ = v / (1−β2^t)
    /// θ ← θ − lr·m̂/(√v̂ + ε) − lr·λ·θ
    /// ```
    ///
    /// The decay term uses the pre-update θ and is not routed through the moments.
    pub fn step(&mut self, mut params: Vec<&mut Parameter<T>>, cfg: &TrainConfig) -> Result<(), TrainError> {
        if params.len() != self.names.len() {
            return Err(TrainError::StateMismatch(format!(
                "optimizer tracks {} parameters, got {}",
                self.names.len(),
                params.len()
            )));
        }
        for (p, name) in params.iter().zip(&self.names) {
            if &p.name != name {
                return Err(TrainError::StateMismatch(format!("expected parameter {name}, got {}", p.name)));
            }
            if !p.has_grad() {
                return Err(TrainError::MissingGradient(p.name.clone()));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let bc1 = T::of(1.0 - cfg.beta1.powi(t));
        let bc2 = T::of(1.0 - cfg.beta2.powi(t));
        let lr = T::of(cfg.lr);
        let decay = T::of(cfg.lr * cfg.weight_decay);
        let eps = T::of(cfg.eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data().to_vec();
            for (((theta, mi), vi), &gi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(&g)
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                let old = *theta;
                let update = lr * m_hat / (v_hat.sqrt() + eps) + decay * old;
                // Subtracting a signed zero could flip the sign bit of a zero θ.
                if update != T::zero() {
                    *theta = old - update;
                }
            }
        }
        Ok(())
    }
}
