//! Closed-form references, written without the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use volterra::resolvent::{NonscalarKernel, OperatorKernel};

/// `Γ(k/2 + 1)` by the recurrence `Γ(x + 1) = x Γ(x)` from `Γ(1)` and `Γ(3/2)`.
pub fn gamma_half_plus_one(k: usize) -> f64 {
    let (mut g, mut x) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt() / 2.0, 1.5)
    };
    while x < k as f64 / 2.0 + 1.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `E_{1/2}(−√t) = Σ_k (−√t)^k / Γ(k/2 + 1)`, equal to `e^t erfc(√t)`.
pub fn mittag_leffler_half(t: f64) -> f64 {
    let z = -t.sqrt();
    let mut sum = 0.0;
    let mut power = 1.0;
    for k in 0..160 {
        sum += power / gamma_half_plus_one(k);
        power *= z;
    }
    sum
}

/// Solution of `s + μ (c e^{−b·} ⋆ s) = 1`.
pub fn exponential_kernel_resolvent(c: f64, b: f64, mu: f64, t: f64) -> f64 {
    let r = b + mu * c;
    (b + mu * c * (-r * t).exp()) / r
}

/// Ornstein–Uhlenbeck `dX = −X dt + dW`.
pub fn ou_mean(x0: f64, t: f64) -> f64 {
    x0 * (-t).exp()
}

pub fn ou_variance(t: f64) -> f64 {
    (1.0 - (-2.0 * t).exp()) / 2.0
}

pub fn diag5() -> DMatrix<f64> {
    -DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]))
}

/// `A(t) = e^{−t} A_0 + t e^{−2t} A_1`, with derivative.
pub fn nonscalar_2x2() -> OperatorKernel {
    let a0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let (b0, b1) = (a0.clone(), a1.clone());
    let at_zero = a0.clone();
    let eval = Arc::new(move |t: f64| &a0 * (-t).exp() + &a1 * (t * (-2.0 * t).exp()));
    let der = Arc::new(move |t: f64| &b0 * -(-t).exp() + &b1 * ((1.0 - 2.0 * t) * (-2.0 * t).exp()));
    OperatorKernel::Nonscalar(NonscalarKernel::with_derivative(2, eval, der, at_zero, 4.0).unwrap())
}
