//! Discrete checks that a computed path satisfies the Volterra equation in
//! integrated, weak and Itô form.
//!
//! The convolution `∫_0^{t_n} A(σ) W(t_n − σ) dσ` is approximated cell by cell
//! with the near/far split of the chosen rule. Over cell `i` the path runs
//! from `W(t_{n−1−i})` just after its noise jump up to `W(t_{n−i})`, so the
//! far weight is paired with the right limit `W^+_c = W_c + Ψ(t_c) ΔW_c`.
//! With this pairing, the identity for `W^Ψ` built from a table of the same
//! rule holds up to roundoff.

use std::sync::Arc;

use rayon::prelude::*;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hilbert::HSOperator;
use crate::quadrature::Quadrature;
use crate::resolvent::{OperatorKernel, ResolventTable};
use crate::stats::{pairwise_sum, Moments};
use crate::wiener::{noise_forcing, sample_wiener, DiffusionProcess, NoiseSpec, WienerIncrements};

use super::{mild_solution, ConvolutionPath, MildSolutionPath};

/// Residuals of an identity at every node `t_1..t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub residuals: Vec<f64>,
    pub sup: f64,
    /// Whether the check used the rule the path was built with. Only then
    /// is the residual at roundoff level; otherwise it is `O(h)`.
    pub compatible: bool,
}

impl IdentityReport {
    fn new(residuals: Vec<f64>, compatible: bool) -> Self {
        let sup = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Self {
            residuals,
            sup,
            compatible,
        }
    }
}

fn ensure_path_inputs(grid: &Grid, inc: &WienerIncrements, dim: usize, state: usize) -> Result<()> {
    grid.ensure_same(inc.grid(), "path vs increments")?;
    if dim != state {
        return Err(Error::DimensionMismatch {
            context: "kernel dimension vs path dimension",
            expected: dim,
            found: state,
        });
    }
    Ok(())
}

/// `W(t_n) = ∫_0^{t_n} A(t_n − τ) W(τ) dτ + ∫_0^{t_n} Ψ dW`, residual in the
/// Euclidean norm.
pub fn verify_volterra_identity(
    path: &ConvolutionPath,
    kernel: &OperatorKernel,
    psi: &DiffusionProcess,
    inc: &WienerIncrements,
    rule: Quadrature,
) -> Result<IdentityReport> {
    let w = path.values();
    ensure_path_inputs(path.grid(), inc, kernel.dim(), w[0].len())?;
    let g = noise_forcing(psi, inc)?;
    let weights = kernel.weights(path.grid(), rule)?;
    let plus: Vec<DVector<f64>> = w[..g.len()].iter().zip(&g).map(|(x, gm)| x + gm).collect();
    let mut ito = DVector::zeros(w[0].len());
    let residuals = (1..w.len())
        .map(|n| {
            ito += &g[n - 1];
            let mut r = &w[n] - &ito;
            for i in 0..n {
                r.gemv(-1.0, &weights.near[i], &w[n - i], 1.0);
                r.gemv(-1.0, &weights.far[i], &plus[n - 1 - i], 1.0);
            }
            r.norm()
        })
        .collect();
    Ok(IdentityReport::new(residuals, rule == path.provenance().quadrature))
}

/// `⟨W(t_n), ξ⟩ = ∫_0^{t_n} a(t_n − τ) ⟨W(τ), A^*ξ⟩ dτ + Σ_{m<n} ⟨ξ, Ψ(t_m) ΔW_m⟩`
/// for a fixed test vector; scalar-type kernels only.
pub fn verify_weak_solution(
    path: &ConvolutionPath,
    kernel: &OperatorKernel,
    xi: &DVector<f64>,
    psi: &DiffusionProcess,
    inc: &WienerIncrements,
    rule: Quadrature,
) -> Result<IdentityReport> {
    let OperatorKernel::ScalarType { kernel: a, generator } = kernel else {
        return Err(Error::NotScalarType("weak solution check"));
    };
    let w = path.values();
    ensure_path_inputs(path.grid(), inc, kernel.dim(), w[0].len())?;
    if xi.len() != w[0].len() {
        return Err(Error::DimensionMismatch {
            context: "test vector vs path dimension",
            expected: w[0].len(),
            found: xi.len(),
        });
    }
    let adj = generator.transpose() * xi;
    let g = noise_forcing(psi, inc)?;
    let weights = a.weights(path.grid(), rule)?;
    let pairing: Vec<f64> = w.iter().map(|x| x.dot(&adj)).collect();
    let pairing_plus: Vec<f64> = w[..g.len()].iter().zip(&g).map(|(x, gm)| (x + gm).dot(&adj)).collect();
    let mut noise = 0.0;
    let residuals = (1..w.len())
        .map(|n| {
            noise += xi.dot(&g[n - 1]);
            let conv: f64 = (0..n)
                .map(|i| weights.near[i] * pairing[n - i] + weights.far[i] * pairing_plus[n - 1 - i])
                .sum();
            w[n].dot(xi) - conv - noise
        })
        .collect();
    Ok(IdentityReport::new(residuals, rule == path.provenance().quadrature))
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Test function `ξ(t) = φ(t) ξ_0`.
#[derive(Clone)]
pub struct ItoTestFunction {
    xi0: DVector<f64>,
    phi: ScalarFn,
    dphi: ScalarFn,
}

impl std::fmt::Debug for ItoTestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ItoTestFunction").field("xi0", &self.xi0).finish()
    }
}

impl ItoTestFunction {
    /// Checks `dphi` against central differences of `phi` on `[0, horizon]`.
    pub fn new(xi0: DVector<f64>, phi: ScalarFn, dphi: ScalarFn, horizon: f64) -> Result<Self> {
        if xi0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("test vector must be finite".into()));
        }
        let fd = 1e-5 * horizon.max(1.0);
        for k in 0..=200 {
            let t = horizon * k as f64 / 200.0;
            let (lo, hi) = ((t - fd).max(0.0), t + fd);
            let diff = (phi(hi) - phi(lo)) / (hi - lo);
            let d = dphi(t);
            if !d.is_finite() || (diff - d).abs() > 1e-4 * (1.0 + d.abs()) {
                return Err(Error::InvalidParameter(format!(
                    "derivative of the test function does not match at t = {t}: {d} vs {diff}"
                )));
            }
        }
        Ok(Self { xi0, phi, dphi })
    }

    pub fn constant(xi0: DVector<f64>) -> Self {
        Self {
            xi0,
            phi: Arc::new(|_| 1.0),
            dphi: Arc::new(|_| 0.0),
        }
    }

    /// `φ(t) = e^{−r t}`.
    pub fn exponential(xi0: DVector<f64>, rate: f64) -> Self {
        Self {
            xi0,
            phi: Arc::new(move |t| (-rate * t).exp()),
            dphi: Arc::new(move |t| -rate * (-rate * t).exp()),
        }
    }

    pub fn xi0(&self) -> &DVector<f64> {
        &self.xi0
    }

    pub fn phi(&self, t: f64) -> f64 {
        (self.phi)(t)
    }

    pub fn dphi(&self, t: f64) -> f64 {
        (self.dphi)(t)
    }
}

/// Signed residuals of the Itô formula for `⟨X(t), ξ(t)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoReport {
    pub residuals: Vec<f64>,
    pub sup: f64,
    pub last: f64,
}

/// Checks
///
/// `⟨X(t), ξ(t)⟩ = ⟨X_0, ξ(0)⟩ + ∫_0^t ⟨(Ȧ⋆X)(s) + A(0) X(s), ξ(s)⟩ ds + ∫_0^t ⟨ξ(s), B dW(s)⟩ + ∫_0^t ⟨X(s), ξ'(s)⟩ ds`
///
/// with trapezoid quadrature in time and left-point Itô sums.
pub fn verify_ito_identity(
    x: &MildSolutionPath,
    kernel: &OperatorKernel,
    b: &HSOperator,
    xi: &ItoTestFunction,
    inc: &WienerIncrements,
) -> Result<ItoReport> {
    let grid = *x.grid();
    let xs = x.values();
    ensure_path_inputs(&grid, inc, kernel.dim(), xs[0].len())?;
    if xi.xi0.len() != xs[0].len() {
        return Err(Error::DimensionMismatch {
            context: "test vector vs path dimension",
            expected: xs[0].len(),
            found: xi.xi0.len(),
        });
    }
    let a0 = kernel.at_zero()?;
    let big_n = grid.steps();
    let h = grid.step();
    let xi0 = &xi.xi0;
    // v_j = Ȧ(t_j)^T ξ_0
    let v: Vec<DVector<f64>> = (0..=big_n)
        .map(|j| kernel.derivative(grid.time(j)).map(|d| d.transpose() * xi0))
        .collect::<Result<_>>()?;
    let a0_xi = a0.transpose() * xi0;
    let g = noise_forcing(&DiffusionProcess::Constant(b.clone()), inc)?;

    let phi: Vec<f64> = (0..=big_n).map(|k| xi.phi(grid.time(k))).collect();
    let dphi: Vec<f64> = (0..=big_n).map(|k| xi.dphi(grid.time(k))).collect();
    let drift: Vec<f64> = (0..=big_n)
        .map(|k| {
            let memory = if k == 0 {
                0.0
            } else {
                let inner: f64 = (1..k).map(|l| xs[l].dot(&v[k - l])).sum();
                h * (0.5 * xs[0].dot(&v[k]) + inner + 0.5 * xs[k].dot(&v[0]))
            };
            phi[k] * (memory + xs[k].dot(&a0_xi))
        })
        .collect();
    let test_drift: Vec<f64> = (0..=big_n).map(|k| dphi[k] * xs[k].dot(xi0)).collect();

    let start = xs[0].dot(xi0) * phi[0];
    let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
    let residuals: Vec<f64> = (1..=big_n)
        .map(|n| {
            t1 += 0.5 * h * (drift[n - 1] + drift[n]);
            t2 += phi[n - 1] * xi0.dot(&g[n - 1]);
            t3 += 0.5 * h * (test_drift[n - 1] + test_drift[n]);
            xs[n].dot(xi0) * phi[n] - start - t1 - t2 - t3
        })
        .collect();
    let sup = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let last = *residuals.last().expect("grid has at least two steps");
    Ok(ItoReport { residuals, sup, last })
}

/// Mean and standard error of the final Itô residual over paths `0..n_paths`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoStatistics {
    pub mean: f64,
    pub std_error: f64,
    pub mean_abs: f64,
    pub n_paths: usize,
}

pub fn ito_residual_statistics(
    table: &ResolventTable,
    x0: &DVector<f64>,
    b: &HSOperator,
    xi: &ItoTestFunction,
    spec: &NoiseSpec,
    n_paths: usize,
) -> Result<ItoStatistics> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let psi = DiffusionProcess::Constant(b.clone());
    let grid = *table.grid();
    let last: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let inc = sample_wiener(spec, &grid, p as u64);
            let x = mild_solution(table, x0, &psi, &inc)?;
            Ok(verify_ito_identity(&x, table.kernel(), b, xi, &inc)?.last)
        })
        .collect::<Result<_>>()?;
    let m = Moments::of(&last);
    let abs: Vec<f64> = last.iter().map(|r| r.abs()).collect();
    Ok(ItoStatistics {
        mean: m.mean,
        std_error: m.std_error(),
        mean_abs: pairwise_sum(&abs) / n_paths as f64,
        n_paths,
    })
}
