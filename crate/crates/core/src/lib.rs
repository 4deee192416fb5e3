//! Numerical toolkit for linear stochastic Volterra equations
//! `X(t) = X_0 + ∫_0^t A(t−τ) X(τ) dτ + ∫_0^t Ψ(τ) dW(τ)` in finite-dimensional
//! Hilbert spaces: kernels and resolvents, Q-Wiener noise, stochastic
//! convolutions, identity checks, and Yosida approximation.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod error;
pub mod grid;
pub mod hilbert;
pub mod kernels;
pub mod quadrature;
pub mod resolvent;
pub mod stats;
pub mod wiener;
pub mod yosida;

pub use error::{Error, Result};
pub use grid::Grid;
pub use quadrature::Quadrature;
