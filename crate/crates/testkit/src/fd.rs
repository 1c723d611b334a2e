//! Central finite differences and the relative-error measure used by the
//! gradient checks.

use issuebert::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Perturbation size.
    pub delta: f64,
    /// Maximum accepted relative error.
    pub max_rel: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    /// Round-off allowance, in units of `ε·magnitude/δ` (the error a central
    /// difference picks up from one unit of rounding in each loss
    /// evaluation). A coordinate whose discrepancy stays within this
    /// allowance cannot be distinguished from round-off and is measured
    /// against it instead of against its own tiny magnitude.
    pub noise_units: f64,
}

pub const F32: Tolerance = Tolerance {
    delta: 1e-3,
    max_rel: 1e-2,
    floor: 1e-8,
    noise_units: 16.0,
};

pub const F64: Tolerance = Tolerance {
    delta: 1e-6,
    max_rel: 1e-5,
    floor: 1e-12,
    noise_units: 16.0,
};

pub trait Checked: Scalar {
    const TOLERANCE: Tolerance;
}

impl Checked for f32 {
    const TOLERANCE: Tolerance = F32;
}

impl Checked for f64 {
    const TOLERANCE: Tolerance = F64;
}

pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// A scalar loss together with the magnitude of the terms it was summed
/// from. Round-off in the loss scales with the latter, not with the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub magnitude: f64,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            magnitude: value.abs(),
        }
    }
}

/// Dot product with a fixed projection, accumulated in f64. Used as a scalar
/// loss so that every output element carries gradient.
pub fn project<T: Scalar>(values: &[T], weights: &[f64]) -> Measured {
    assert_eq!(values.len(), weights.len());
    let terms = values.iter().zip(weights).map(|(v, w)| v.to_f64_lossy() * w);
    Measured {
        value: terms.clone().sum(),
        magnitude: terms.map(f64::abs).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numeric {
    pub value: f64,
    /// `ε_T · magnitude / (x₊ − x₋)`, the round-off scale of `value`.
    pub noise: f64,
}

/// `(L(x₊) − L(x₋)) / (x₊ − x₋)` for every coordinate, where `x₊ = x + δ` and
/// `x₋ = x − δ` as actually represented in `T`.
pub fn numeric_gradient<T: Scalar, S: Clone>(
    state: &S,
    coords: usize,
    delta: f64,
    get: impl Fn(&S, usize) -> T,
    set: impl Fn(&mut S, usize, T),
    loss: impl Fn(&S) -> Measured,
) -> Vec<Numeric> {
    let mut work = state.clone();
    (0..coords)
        .map(|i| {
            let x = get(state, i);
            let plus = x + T::of(delta);
            let minus = x - T::of(delta);
            set(&mut work, i, plus);
            let lp = loss(&work);
            set(&mut work, i, minus);
            let lm = loss(&work);
            set(&mut work, i, x);
            let step = (plus - minus).to_f64_lossy();
            Numeric {
                value: (lp.value - lm.value) / step,
                noise: T::epsilon().to_f64_lossy() * lp.magnitude.max(lm.magnitude) / step,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worst {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
    /// Discrepancy in round-off units.
    pub noise_multiple: f64,
}

pub fn worst(analytic: &[f64], numeric: &[Numeric], tol: &Tolerance) -> Worst {
    assert_eq!(analytic.len(), numeric.len());
    let mut w = Worst {
        coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        rel: 0.0,
        noise_multiple: 0.0,
    };
    for (i, (&a, n)) in analytic.iter().zip(numeric).enumerate() {
        let floor = tol.floor.max(tol.noise_units * n.noise / tol.max_rel);
        let r = rel_error(a, n.value, floor);
        // NaN counts as worse than anything.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(r <= w.rel) {
            w = Worst {
                coord: i,
                analytic: a,
                numeric: n.value,
                rel: r,
                noise_multiple: (a - n.value).abs() / n.noise,
            };
        }
    }
    w
}
