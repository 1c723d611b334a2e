use super::Tensor;
use crate::Scalar;

/// GELU variant. `Erf` is the exact `x·Φ(x)`; `Tanh` is the common approximation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeluKind {
    #[default]
    Erf,
    Tanh,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const TANH_COEF: f64 = 0.044_715;

pub fn gelu_scalar<T: Scalar>(x: T, kind: GeluKind) -> T {
    let half = T::of(0.5);
    match kind {
        GeluKind::Erf => half * x * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf()),
        GeluKind::Tanh => {
            let inner = T::of(SQRT_2_OVER_PI) * (x + T::of(TANH_COEF) * x * x * x);
            half * x * (T::one() + inner.tanh())
        }
    }
}

fn gelu_grad<T: Scalar>(x: T, kind: GeluKind) -> T {
    let half = T::of(0.5);
    match kind {
        GeluKind::Erf => {
            let cdf = half * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf());
            let pdf = (-half * x * x).exp() * T::of(1.0 / (2.0 * std::f64::consts::PI).sqrt());
            cdf + x * pdf
        }
        GeluKind::Tanh => {
            let c = T::of(SQRT_2_OVER_PI);
            let a = T::of(TANH_COEF);
            let inner = c * (x + a * x * x * x);
            let t = inner.tanh();
            let dinner = c * (T::one() + T::of(3.0) * a * x * x);
            half * (T::one() + t) + half * x * (T::one() - t * t) * dinner
        }
    }
}

pub fn gelu<T: Scalar>(x: &Tensor<T>, kind: GeluKind) -> Tensor<T> {
    x.map(|v| gelu_scalar(v, kind))
}

/// `x` is the forward input.
pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>, kind: GeluKind) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        *d *= gelu_grad(v, kind);
    }
    dx
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(T::tanh)
}

/// `y` is the forward output.
pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= T::one() - v * v;
    }
    dx
}
