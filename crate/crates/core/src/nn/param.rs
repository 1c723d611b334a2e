use super::Tensor;
use crate::Scalar;

/// Trainable tensor with a gradient buffer of the same shape.
///
/// `touched` records whether any backward pass has written to the gradient
/// since the last [`Parameter::zero_grad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    touched: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
            touched: false,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], v: T) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|x| *x = v);
        Self::new(name, t)
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill_zero();
        self.touched = false;
    }

    pub fn has_grad(&self) -> bool {
        self.touched
    }

    /// Adds `g` elementwise into the gradient. `g` must have the parameter's length.
    pub fn accumulate(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.grad.len(), "gradient size for {}", self.name);
        for (a, &b) in self.grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
        self.touched = true;
    }

    /// Adds `g` into the gradient row `row` of a 2-D parameter.
    pub fn accumulate_row(&mut self, row: usize, g: &[T]) {
        for (a, &b) in self.grad.row_mut(row).iter_mut().zip(g) {
            *a += b;
        }
        self.touched = true;
    }

    pub fn mark_touched(&mut self) {
        self.touched = true;
    }
}
