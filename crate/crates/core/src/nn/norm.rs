use super::{Parameter, Tensor};
use crate::Scalar;

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Per-row normalization over the last dimension with learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub eps: f64,
}

pub struct LayerNormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(prefix: &str, dim: usize, eps: f64) -> Self {
        Self {
            gamma: Parameter::filled(format!("{prefix}.gamma"), &[dim], T::one()),
            beta: Parameter::zeros(format!("{prefix}.beta"), &[dim]),
            eps,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, LayerNormCache<T>) {
        let (rows, n) = x.rows_cols();
        debug_assert_eq!(n, self.gamma.len());
        let nf = T::of(n as f64);
        let eps = T::of(self.eps);
        let mut xhat = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            let xh = xhat.row_mut(r);
            for (h, &v) in xh.iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
            let xh = xhat.row(r);
            for (j, out) in y.row_mut(r).iter_mut().enumerate() {
                *out = xh[j] * self.gamma.value.data()[j] + self.beta.value.data()[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (rows, n) = dy.rows_cols();
        let nf = T::of(n as f64);
        let mut dgamma = vec![T::zero(); n];
        let mut dbeta = vec![T::zero(); n];
        let mut dx = dy.clone();
        let gamma = self.gamma.value.data();
        for r in 0..rows {
            let g = dy.row(r);
            let xh = cache.xhat.row(r);
            let mut sum_d = T::zero();
            let mut sum_dx = T::zero();
            for j in 0..n {
                dgamma[j] += g[j] * xh[j];
                dbeta[j] += g[j];
                let d = g[j] * gamma[j];
                sum_d += d;
                sum_dx += d * xh[j];
            }
            let is = cache.inv_std[r];
            for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
                let d = g[j] * gamma[j];
                *out = is / nf * (nf * d - sum_d - xh[j] * sum_dx);
            }
        }
        self.gamma.accumulate(&dgamma);
        self.beta.accumulate(&dbeta);
        dx
    }

    pub fn parameters(&self) -> [&Parameter<T>; 2] {
        [&self.gamma, &self.beta]
    }

    pub fn parameters_mut(&mut self) -> [&mut Parameter<T>; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_row_maps_to_zero() {
        let ln = LayerNorm::<f64>::new("ln", 3, LAYER_NORM_EPS);
        let (y, _) = ln.forward(&Tensor::from_rows(&[&[5.0, 5.0, 5.0]]));
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_variance_row_is_unchanged() {
        let ln = LayerNorm::<f64>::new("ln", 2, 0.0);
        let (y, _) = ln.forward(&Tensor::from_rows(&[&[1.0, -1.0]]));
        assert_eq!(y.data(), &[1.0, -1.0]);
        let ln = LayerNorm::<f64>::new("ln", 2, LAYER_NORM_EPS);
        let (y, _) = ln.forward(&Tensor::from_rows(&[&[1.0, -1.0]]));
        assert!((y.data()[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn zero_gamma_broadcasts_beta() {
        let mut ln = LayerNorm::<f32>::new("ln", 3, LAYER_NORM_EPS);
        ln.gamma.value.fill_zero();
        ln.beta.value.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        let (y, _) = ln.forward(&Tensor::from_rows(&[&[1.0, 7.0, -3.0], &[0.0, 0.1, 9.0]]));
        assert_eq!(y.data(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }
}
